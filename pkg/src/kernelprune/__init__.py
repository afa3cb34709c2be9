"""Prune benchmarked kernel configurations and train runtime selectors.

Workflow: benchmark CSV (or synthetic data) -> per-problem normalization ->
variance analysis -> subset selection -> classifier training -> geometric
mean fraction-of-optimal evaluation -> nested-if code emission.
"""

from .classify import (CLASSIFIER_SPECS, FEATURE_NAMES, TREE_PRESETS,
                       ForestModel, TreeModel, TreeParams, forest_predict,
                       knn_predict, label_best_in_subset, predict_tree,
                       problem_features, train_classifier, train_forest,
                       train_tree)
from .codegen import (DEFAULT_TEMPLATE, EmitTemplate, emit_nested_if,
                      export_model, import_model)
from .dataset import (DEFAULT_TILE_SET, DEFAULT_WG_PAIRS, KernelConfig,
                      PerfMatrix, ProblemSize, SplitSpec, SynthModel,
                      enumerate_configs, parse_benchmark_csv,
                      serialize_benchmark_csv, split, synth_generate,
                      synth_problems)
from .evaluate import (EvalReport, classifier_score, eval_report_csv,
                       grid_report, oracle_predictor, per_row_csv,
                       subset_ceiling)
from .normalize import SCHEME_KINDS, NormMatrix, NormScheme, normalize
from .pca import PcaModel, VarianceReport, fit_pca, transform, variance_report
from .pipeline import PipelineConfig, run_pipeline
from .selection import (METHODS, NOISE, ClusterLabels, ConfigSubset, hdbscan,
                        hdbscan_sweep, kmeans, select_subset,
                        spectral_cluster, subset_from_clusters, top_n,
                        tree_select)

__version__ = "0.1.0"
