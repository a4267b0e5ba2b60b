"""
Layers, backpropagation and Adam
================================

Every network in the package is a ``Sequential`` of small numpy layers with
hand-written backward passes.  This script builds a few of them, checks an
analytic gradient against central differences and takes some Adam steps.
"""

import numpy as np

from ganprng import nncore as nn

rng = np.random.default_rng(0)

###############################################################################
# A dense layer and a kernel-2 convolution
# -----------------------------------------
# Dense maps ``(batch, in)`` to ``(batch, out)``; Conv1D slides filters over
# ``(batch, channels, length)`` with no padding, so length 8 becomes 7.

dense = nn.Dense(3, 2, rng)
print("dense:", dense.forward(np.ones((1, 3))))

conv = nn.Conv1D(1, 4, kernel=2, rng=rng)
x = rng.normal(size=(2, 1, 8))
print("conv output shape:", conv.forward(x).shape)

pool = nn.MaxPool1D(2, 2)
print("max pool of [1, 3, 2, 0]:", nn.maxpool1d_forward(np.array([1.0, 3, 2, 0]), 2, 2))

###############################################################################
# The mod activation
# ------------------
# Generator outputs pass through ``x mod 2**16``.  Its backward pass is the
# identity (a straight-through estimate), since the true derivative is 1
# everywhere except at the wrap points.

print("mod:", nn.mod_activation(np.array([70000.0, -1.0, 3.5]), 65536.0))

###############################################################################
# Checking a gradient by central differences
# -------------------------------------------

net = nn.Sequential([nn.Dense(4, 5, rng), nn.LeakyReLU(0.2), nn.Dense(5, 1, rng), nn.Sigmoid()])
x = rng.normal(size=(3, 4))
target = np.array([[0.0], [1.0], [1.0]])

net.zero_grad()
pred = net.forward(x)
net.backward(nn.least_squares_grad(pred, target))
_, w, g = next(net.parameters())

h = 1e-5
w[0, 0] += h
up = nn.least_squares_loss(net.forward(x), target)
w[0, 0] -= 2 * h
down = nn.least_squares_loss(net.forward(x), target)
w[0, 0] += h
print(f"analytic {g[0, 0]:.8f}  numeric {(up - down) / (2 * h):.8f}")

###############################################################################
# A few Adam steps
# ----------------

opt = nn.Adam(net, lr=0.05)
for step in range(200):
    net.zero_grad()
    pred = net.forward(x)
    net.backward(nn.least_squares_grad(pred, target))
    opt.step()
print("loss after 200 steps:", nn.least_squares_loss(net.forward(x), target))
print("adam step count:", opt.step_count)
