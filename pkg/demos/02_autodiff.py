"""Tour of the reverse-mode engine: build a loss, backprop, cross-check.

The same Tensor type powers the full forecasting model; here we use it on
a toy two-layer computation and compare every gradient against central
finite differences.
"""

import numpy as np

from posecast import autodiff as ad
from posecast.gradcheck import finite_difference, relative_error

rng = np.random.default_rng(7)

x = ad.constant(rng.normal(size=(4, 3)))
w1 = ad.parameter(rng.normal(size=(3, 8)) * 0.3)
w2 = ad.parameter(rng.normal(size=(8, 2)) * 0.3)

hidden = ad.tanh(ad.matmul(x, w1))
out = ad.matmul(hidden, w2)
loss = ad.tensor_sum(ad.mul(out, out))

loss.backward()
print(f"loss = {loss.values.item():.6f}")

for name, p in [("w1", w1), ("w2", w2)]:
    def rebuild():
        h = ad.tanh(ad.matmul(x, w1))
        o = ad.matmul(h, w2)
        return ad.tensor_sum(ad.mul(o, o)).values.item()

    numeric = finite_difference(rebuild, [p])[0]
    err = relative_error(p.grad, numeric)
    print(f"{name}: analytic vs numeric relative error {err:.2e}")

# One Adam step moves parameters downhill.
state = ad.AdamState([w1, w2])
before = loss.values.item()
ad.adam_step([w1, w2], state, lr=0.05)

hidden = ad.tanh(ad.matmul(x, w1))
out = ad.matmul(hidden, w2)
after = ad.tensor_sum(ad.mul(out, out)).values.item()
print(f"after one Adam step: {before:.6f} -> {after:.6f}")
