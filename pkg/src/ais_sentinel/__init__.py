"""AIS on-off switching anomaly detection.

Decode AIVDM position reports, build resampled sliding-window samples,
train a small multilayer perceptron from scratch and evaluate it, with a
synthetic traffic generator for reproducible desk-scale runs.
"""

from .codec import PositionReport, decode_lines, encode_position_report, parse_sentence
from .geo import GeoPoint, RangeRule, haversine_nmi
from .nn import MlpModel, TrainConfig, load_model, predict, save_model, train
from .pipeline import Label, PrepConfig, encode_dataset, prepare_samples, split_dataset

__version__ = "0.1.0"

__all__ = [
    "GeoPoint",
    "Label",
    "MlpModel",
    "PositionReport",
    "PrepConfig",
    "RangeRule",
    "TrainConfig",
    "decode_lines",
    "encode_dataset",
    "encode_position_report",
    "haversine_nmi",
    "load_model",
    "parse_sentence",
    "predict",
    "prepare_samples",
    "save_model",
    "split_dataset",
    "train",
]
