"""Route-change detection from traceroute latency measurements.

Thin Python layer over the C++ core: dataset ingestion, feature engineering,
the boosted-tree engine, stacked-ensemble training with threshold
calibration, TPE hyperparameter search, evaluation metrics, and the seeded
synthetic benchmark generator.
"""

from pathwatch._core import (  # noqa: F401
    AggregateTables,
    BaselineModel,
    BaselineParams,
    DataError,
    Dataset,
    FeatureConfig,
    FeatureMatrix,
    GbdtModel,
    GbdtParams,
    GroundTruth,
    ImbalanceReport,
    ParamSpec,
    SearchSpace,
    StackedModel,
    StackedPrediction,
    TracerouteRecord,
    benchmark_suite,
    build_features,
    class_distribution,
    classification_metrics,
    deserialize_model,
    deserialize_stacked,
    fit_baseline,
    fit_gbdt,
    gbdt_params,
    make_dataset,
    meta_search_space,
    optimize,
    parse_csv,
    parse_jsonl,
    predict_baseline,
    predict_proba,
    predict_stacked,
    serialize_model,
    serialize_stacked,
    set_max_jobs,
    split,
    stratified_kfold,
    synth_generate,
    threshold_scan,
    train_stacked,
    wilcoxon_signed_rank,
    write_csv,
    __version__,
)
