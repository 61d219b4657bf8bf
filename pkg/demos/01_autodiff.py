"""A tour of the tape: build a tiny network by hand, run backward, then confirm
the gradients with central differences.

    python3 demos/01_autodiff.py
"""

import numpy as np

from dacontext import tensor as T
from dacontext.gradcheck import grad_check

rng = np.random.default_rng(0)

# two-layer classifier on a batch of four points
x = T.constant(rng.normal(size=(4, 3)))
w1 = T.parameter(rng.normal(size=(3, 5)), "w1")
w2 = T.parameter(rng.normal(size=(5, 2)), "w2")
y = np.array([0, 1, 1, 0])


def loss():
    hidden = T.tanh(T.matmul(x, w1))
    return T.cross_entropy(T.matmul(hidden, w2), y)


value = loss()
print(f"loss = {value.item():.6f}")
print("ops on the tape, in the order backward visits them in reverse:")
for t in T.Tape(value):
    print(f"  {t._node.op:<14} -> shape {t.shape}")

value.backward()
print("\nd loss / d w2 =\n", np.round(w2.grad, 4))

# the same numbers from finite differences
report = grad_check(loss, [w1, w2])
print("\n" + str(report))

# shape mistakes fail loudly instead of broadcasting silently
try:
    T.add(T.constant(np.ones(3)), T.constant(np.ones((2, 3))))
except T.ShapeError as exc:
    print(f"\nShapeError: {exc}")
