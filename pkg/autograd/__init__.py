from autograd.tensor import Tape, Tensor, constant  # noqa: F401
