import numpy as np

from ..exceptions import EmptyInput, LengthMismatch


def position_errors(truth, preds) -> np.ndarray:
    """Euclidean distance (m) between each true and predicted (x, y)."""
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    preds = np.asarray(preds, dtype=float).reshape(-1, 2)
    if len(truth) != len(preds):
        raise LengthMismatch(f"{len(truth)} true positions but {len(preds)} predictions")
    if len(truth) == 0:
        raise EmptyInput("mean position error of zero rows")
    return np.hypot(truth[:, 0] - preds[:, 0], truth[:, 1] - preds[:, 1])


def mpe(truth, preds) -> float:
    """Mean position error in meters."""
    return float(position_errors(truth, preds).mean())
