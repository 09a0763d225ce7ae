"""Train a small monotone implicit classifier and export it as JSON.

The exported file follows the portable model schema (format_version "1"
with row-major flat lists for P, Q, U, bias, V, v) consumed by the
verification toolkit.  A prediction-parity file with held-out inputs and
the framework's logits is written alongside so an independent
implementation can cross-check its forward pass.
"""

import argparse
import dataclasses
import json
from pathlib import Path

import numpy as np
import torch

from .data import make_two_moons, read_dataset_csv, write_dataset_csv
from .network import MonotoneImplicitNet

FORMAT_VERSION = "1"


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    latent: int = 8
    m: float = 20.0
    batch_size: int = 128
    epochs: int = 10
    dataset: str | None = None  # CSV path; synthesized when None
    train_size: int = 1024
    noise: float = 0.1
    lr: float = 0.05
    seed: int = 0
    parity_size: int = 100

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("monotonicity margin m must be positive")
        if self.latent < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("latent, batch_size must be >= 1 and epochs >= 0")


def _export_model(net, out_path):
    def flat(tensor):
        return [float(c) for c in tensor.detach().numpy().ravel()]

    raw = {
        "format_version": FORMAT_VERSION,
        "p": net.P.shape[0],
        "q": net.U.shape[1],
        "r": net.V.shape[0],
        "m": net.m,
        "P": flat(net.P),
        "Q": flat(net.Q),
        "U": flat(net.U),
        "bias": flat(net.bias),
        "V": flat(net.V),
        "v": flat(net.v),
    }
    with open(out_path, "w") as fh:
        json.dump(raw, fh, indent=2)
        fh.write("\n")


def train_and_export(cfg, out_dir):
    """Train per the config and write model.json plus parity.json.

    Returns (model_path, parity_path).  Deterministic: re-running with the
    same config produces byte-identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(1)

    if cfg.dataset is not None:
        features, labels = read_dataset_csv(cfg.dataset)
    else:
        features, labels = make_two_moons(cfg.train_size, cfg.noise, seed=cfg.seed)
        write_dataset_csv(out_dir / "train.csv", features, labels)
    inputs = torch.as_tensor(features, dtype=torch.float64)
    targets = torch.as_tensor(labels, dtype=torch.long)

    gen = torch.Generator().manual_seed(cfg.seed)
    net = MonotoneImplicitNet(cfg.latent, inputs.shape[1], int(targets.max()) + 1,
                              cfg.m, gen)
    opt = torch.optim.SGD(net.parameters(), lr=cfg.lr, momentum=0.9)
    loss_fn = torch.nn.CrossEntropyLoss()

    n = inputs.shape[0]
    for _ in range(cfg.epochs):
        order = torch.randperm(n, generator=gen)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            opt.zero_grad()
            loss = loss_fn(net(inputs[batch]), targets[batch])
            loss.backward()
            opt.step()

    model_path = out_dir / "model.json"
    _export_model(net, model_path)

    # Held-out parity set: fresh draws from the same distribution.
    parity_x, _ = make_two_moons(cfg.parity_size, cfg.noise, seed=cfg.seed + 1)
    with torch.no_grad():
        parity_logits = net(torch.as_tensor(parity_x, dtype=torch.float64))
    parity_path = out_dir / "parity.json"
    with open(parity_path, "w") as fh:
        json.dump(
            {
                "inputs": [[float(c) for c in row] for row in parity_x],
                "logits": [[float(c) for c in row] for row in parity_logits.numpy()],
            },
            fh, indent=2,
        )
        fh.write("\n")
    return model_path, parity_path


def _accuracy(net, inputs, targets):
    with torch.no_grad():
        return float((net(inputs).argmax(dim=1) == targets).double().mean())


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mondeq-export",
        description="Train a small monotone implicit classifier and export JSON weights.",
    )
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--dataset", default=None, help="feature/label CSV; synthesized when omitted")
    parser.add_argument("--latent", type=int, default=8)
    parser.add_argument("--m", type=float, default=20.0)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--train-size", type=int, default=1024)
    parser.add_argument("--noise", type=float, default=0.1)
    parser.add_argument("--lr", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--parity-size", type=int, default=100)
    args = parser.parse_args(argv)
    cfg = TrainConfig(
        latent=args.latent, m=args.m, batch_size=args.batch_size, epochs=args.epochs,
        dataset=args.dataset, train_size=args.train_size, noise=args.noise,
        lr=args.lr, seed=args.seed, parity_size=args.parity_size,
    )
    model_path, parity_path = train_and_export(cfg, args.out_dir)
    print(json.dumps({"model": str(model_path), "parity": str(parity_path)}, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
