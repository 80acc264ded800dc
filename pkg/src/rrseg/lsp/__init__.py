"""Label-shift prediction: datasets, shift classifiers, shift embeddings."""
from .dataset import (
    ShiftPair,
    build_shift_dataset,
    consecutive_pairs,
    positive_rate,
    read_shift_pairs_jsonl,
    write_shift_pairs_jsonl,
)
from .embed import cache_shift_embeddings, shift_embeddings
from .models import (
    PAIR_SCHEDULE,
    SIAMESE_SCHEDULE,
    SHIFT_LABELS,
    PairShiftModel,
    ShiftModel,
    ShiftSchedule,
    SiameseShiftModel,
    eval_shift,
    train_pair_shift,
    train_siamese_shift,
)

__all__ = [
    "PAIR_SCHEDULE",
    "SHIFT_LABELS",
    "SIAMESE_SCHEDULE",
    "PairShiftModel",
    "ShiftModel",
    "ShiftPair",
    "ShiftSchedule",
    "SiameseShiftModel",
    "build_shift_dataset",
    "cache_shift_embeddings",
    "consecutive_pairs",
    "eval_shift",
    "positive_rate",
    "read_shift_pairs_jsonl",
    "shift_embeddings",
    "train_pair_shift",
    "train_siamese_shift",
]
