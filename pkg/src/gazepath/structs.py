"""Plain records shared across modules."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Scanpath:
    """Fixations in pixels / milliseconds for one viewing of one image."""

    x: list
    y: list
    t: list
    image_id: str = ""
    target: str = ""
    subject: str = "model"
    img_w: int = 1680
    img_h: int = 1050
    empty_prediction: bool = False

    def __post_init__(self):
        self.x = [float(v) for v in self.x]
        self.y = [float(v) for v in self.y]
        self.t = [float(v) for v in self.t]
        if not (len(self.x) == len(self.y) == len(self.t)):
            raise ValueError("x, y and t must have equal length")

    def __len__(self):
        return len(self.x)

    @property
    def fixations(self):
        return list(zip(self.x, self.y, self.t))

    def xy(self):
        return np.column_stack([self.x, self.y]).astype(np.float64).reshape(-1, 2)

    def to_record(self):
        return {
            "name": self.image_id,
            "subject": self.subject,
            "task": self.target,
            "X": list(self.x),
            "Y": list(self.y),
            "T": list(self.t),
            "img_w": int(self.img_w),
            "img_h": int(self.img_h),
        }


@dataclass
class FeatureBundle:
    """Frozen inputs for one image-target pair."""

    image_features: np.ndarray  # (C, h, w)
    target_embedding: np.ndarray  # (d_text,)
    image_id: str = ""
    target_name: str = ""
    meta: dict = field(default_factory=dict)
