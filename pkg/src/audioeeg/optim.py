"""Parameter update rules: adaptive moments (default) and plain SGD."""

import numpy as np


class Adam:
    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 epsilon=1e-8):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        correction1 = 1 - self.beta1 ** self.t
        correction2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * np.square(g)
            p -= self.learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + self.epsilon)


class SGD:
    def __init__(self, params, learning_rate=1e-3):
        self.params = list(params)
        self.learning_rate = learning_rate

    def step(self, grads):
        for p, g in zip(self.params, grads):
            p -= self.learning_rate * g


def make_optimizer(name, params, learning_rate, beta1=0.9, beta2=0.999,
                   epsilon=1e-8):
    if name == "adam":
        return Adam(params, learning_rate=learning_rate, beta1=beta1,
                    beta2=beta2, epsilon=epsilon)
    if name == "sgd":
        return SGD(params, learning_rate=learning_rate)
    raise ValueError(f"unknown optimizer {name!r}")
