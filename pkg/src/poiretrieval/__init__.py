"""Feature-space image retrieval and evaluation.

Descriptors come from an external extractor. The package covers feature
augmentation (l2 / PCA / whitening), multi-scale spatial search, average
query expansion, SVM reranking of noisy concept pools and mAP evaluation.
"""

from .augmentation import PcaModel, augment, l2_normalize, pca_fit, pca_project, whiten
from .errors import ConvergenceError, DataValidationError, UnknownItemError, ZeroVectorError
from .evaluation import (EvalReport, GroundTruth, Judgment, average_precision,
                         build_same_concept_gt, mean_average_precision, parse_groundtruth)
from .features import FeatureSet, load_features, save_features, validate
from .reranking import (RerankConfig, SvmModel, rerank_auto, rerank_weak, select_top_k,
                        svm_score, train_linear_svm)
from .retrieval import RankedList, expand_query_avg, rank_l2, rank_with_qe
from .spatial import (PatchFeatureSet, PatchPlan, PatchSpec, patch_count, patch_plan,
                      spatial_distance, spatial_rank)

__version__ = "0.1.0"
