"""The dense network on its own: shapes, a gradient check and a small fit.

Run: python demos/03_dense_network.py
"""
import numpy as np

from fermentor import nn

# the predictor's default architecture: batch norm on hidden layers, tanh01 output
net = nn.init_net(nn.parse_arch("4,64,128,256,128,1"), seed=0)
print("layers:", [(s.in_dim, s.out_dim, s.activation, s.batch_norm) for s in net.specs])
print("trainable weights and biases:", net.n_params())

# forward is pure; backward needs the cache of the same net
rng = np.random.default_rng(0)
X = rng.uniform(size=(8, 4))
out, cache = nn.forward(net, X, "train")
grads = nn.backward(net, cache, nn.mse_grad(out, np.full((8, 1), 0.5)))
print("output shape:", out.shape, " dL/dX shape:", grads.inputs.shape)

# one weight checked against central differences
small = nn.init_net(nn.layer_specs([3, 4, 1]), seed=1)
X, Y = rng.normal(size=(6, 3)), rng.uniform(size=(6, 1))
out, cache = nn.forward(small, X, "train")
g = nn.backward(small, cache, nn.mse_grad(out, Y)).layers[0]["W"][1, 2]
h = 1e-5
W = small.layers[0].W
W[1, 2] += h
up = nn.mse(nn.forward(small, X, "train")[0], Y)
W[1, 2] -= 2 * h
down = nn.mse(nn.forward(small, X, "train")[0], Y)
W[1, 2] += h
print(f"dL/dW[1,2]: backprop {g:.8f}, central difference {(up - down) / (2 * h):.8f}")

# fit y = (x0 + x1) / 2 with plain minibatch SGD
X = rng.uniform(size=(200, 2))
Y = X.mean(axis=1, keepdims=True)
fit = nn.init_net(nn.layer_specs([2, 16, 1], batch_norm=False, output="identity"), seed=0)
fit, trace = nn.train(fit, X, Y, nn.TrainConfig(learning_rate=0.2, max_epochs=400, loss_threshold=1e-5))
print(f"fit: {len(trace)} epochs, loss {trace[0]:.4f} -> {trace[-1]:.6f}")
print("round trip through text:", np.array_equal(nn.loads_net(nn.dumps_net(fit))[0].predict(X), fit.predict(X)))
