"""Temporal knowledge-graph completion with quaternion embeddings.

Facts (head, relation, tail, timestamp) are scored by rotating the
relation embedding with a unit quaternion derived from the timestamp,
adding a periodic sine translation, and taking the quaternion inner
product of head-times-relation against the tail. Training uses a full
softmax multi-class log-loss over reciprocal-augmented facts with
p-norm embedding and temporal-smoothness regularizers under Adagrad;
evaluation reports time-wise filtered MRR and Hits@k.
"""

from .data import (
    FilterIndex,
    Quadruple,
    QuadrupleDataset,
    Vocabulary,
    batch_iterator,
    build_filter_index,
    load_dataset,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DatasetError,
    ShapeError,
    TkgqError,
    TrainingDivergedError,
)
from .evaluation import RankingResult, evaluate, rank_query
from .model import (
    Gradients,
    ModelParams,
    ScoreBatch,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
    score,
    score_all_entities,
    score_gradients,
    time_aware_relation,
    time_sensitive_relation,
)
from .patterns import PatternReport, verify_all
from .quat import QuaternionBatch
from .train import (
    AdagradState,
    TrainConfig,
    TrainResult,
    ablation_eval,
    adagrad_step,
    embedding_regularizer,
    multiclass_log_loss,
    temporal_regularizer,
    total_loss,
    train,
    train_model,
)

__version__ = "0.1.0"
