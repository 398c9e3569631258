import numpy as np

from errors import ShapeError


def poly_lr(step: int, total_steps: int, lr0: float, power: float = 0.9) -> float:
    """lr0·(1 − step/total)^power; reaches exactly 0 at the last step."""
    if total_steps <= 0:
        return lr0
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr0 * (1.0 - step / total_steps) ** power


def linear_lr(step: int, total_steps: int, lr0: float) -> float:
    return poly_lr(step, total_steps, lr0, power=1.0)


def init_velocity(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(value) for name, value in params.items()}


def sgd_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
    momentum: float,
    weight_decay: float,
    velocity: dict[str, np.ndarray],
) -> dict[str, np.ndarray]:
    """In-place momentum SGD with weight decay folded into the buffer.

    v ← momentum·v + (grad + weight_decay·param); param ← param − lr·v.
    Parameters missing from `grads` get a zero gradient.
    """
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param)
        if grad.shape != param.shape:
            raise ShapeError(f"{name}: gradient {grad.shape} does not match parameter {param.shape}")
        v = velocity.setdefault(name, np.zeros_like(param))
        if v.shape != param.shape:
            raise ShapeError(f"{name}: velocity {v.shape} does not match parameter {param.shape}")
        v *= momentum
        v += grad + weight_decay * param
        param -= lr * v
    return params
