import numpy as np
from pydantic import BaseModel

from errors import DataError, ShapeError


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


class CDMetrics(BaseModel):
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        if p == 0 or r == 0:
            return 0.0
        return 2.0 / (1.0 / r + 1.0 / p)

    @property
    def iou(self) -> float:
        return _ratio(self.tp, self.tp + self.fn + self.fp)

    @property
    def unchanged_f1(self) -> float:
        return _ratio(2 * self.tn, 2 * self.tn + self.fn + self.fp)

    @property
    def mean_f1(self) -> float:
        return 0.5 * (self.f1 + self.unchanged_f1)

    def __add__(self, other: "CDMetrics") -> "CDMetrics":
        return CDMetrics(tp=self.tp + other.tp, fp=self.fp + other.fp, fn=self.fn + other.fn, tn=self.tn + other.tn)

    def row(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "iou": self.iou}


def cd_metrics(pred: np.ndarray, gt: np.ndarray) -> CDMetrics:
    """Pixel counts for the change class (1) of a binary prediction against ground truth."""
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    if not (np.isin(pred, (0, 1)).all() and np.isin(gt, (0, 1)).all()):
        raise DataError("cd_metrics expects binary masks")
    pred, gt = pred.astype(bool), gt.astype(bool)
    return CDMetrics(
        tp=int((pred & gt).sum()),
        fp=int((pred & ~gt).sum()),
        fn=int((~pred & gt).sum()),
        tn=int((~pred & ~gt).sum()),
    )
