"""Compare backprop-through-time gradients with central finite differences.

Runs each architecture on a few random tiny problems and prints the worst
relative error per parameter array.
"""
import numpy as np

from respnet.nn.gradcheck import fd_gradient, max_relative_error
from respnet.nn.model import ARCHITECTURES, ModelDims, init_params, loss_and_grad


def main():
    dims = ModelDims(hidden=4, attention=3)
    for arch in ARCHITECTURES:
        rng = np.random.default_rng([7, len(arch)])
        model = init_params(arch, dims, rng)
        for _, a in model.named_arrays():
            a += 0.3 * rng.normal(size=a.shape)
        x = rng.uniform(size=(2, 8))
        y = rng.integers(0, 6, size=2)
        _, grads, _ = loss_and_grad(model, x, y)
        numeric = fd_gradient(model, x, y)
        print(f"{arch}: overall {max_relative_error(grads, numeric):.2e}")
        for (name, g), (_, n) in zip(grads.named_arrays(), numeric.named_arrays()):
            err = np.abs(g - n).max() / max(np.abs(g).max(), np.abs(n).max(), 1e-6)
            print(f"    {name:<10} {str(g.shape):<10} {err:.1e}")


if __name__ == "__main__":
    main()
