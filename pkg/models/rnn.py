# coding=utf-8
"""Recurrent sequence detector.

    a^(k) = b + W h^(k-1) + U y^(k),  h^(k) = tanh(a^(k))
    o^(k) = c + V h^(k),              pmf^(k) = softmax(o^(k))

The LSTM cell stacks its input/forget/candidate/output gates along the first
axis of W, U and b (4 * state_dim rows). Training minimizes the summed
negative log-likelihood of the true bits with backpropagation through time.
"""
import copy
import dataclasses
import logging
import math

import numpy as np
import torch
import torch.nn as nn
from tqdm import tqdm

from utils.errors import NonFiniteLoss
from utils.scheduler import HalveOnIncreaseSchedule

logger = logging.getLogger(__name__)

DTYPE = torch.float64
CELL_KINDS = ("vanilla", "lstm")
PARAM_NAMES = ("W", "U", "b", "V", "c")


class AverageMeter(object):
    """Computes and stores the average and current value"""
    def __init__(self):
        self.reset()

    def reset(self):
        self.val = 0
        self.avg = 0
        self.sum = 0
        self.count = 0

    def update(self, val, n=1):
        self.val = val
        self.sum += val * n
        self.count += n
        self.avg = self.sum / self.count


@dataclasses.dataclass(frozen=True)
class OneHotTarget:
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=np.float64)
        if pmf.shape != (2,) or np.any(pmf < 0) or not math.isclose(pmf.sum(), 1.0):
            raise ValueError("target must be a length-2 PMF")
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def from_bit(cls, bit):
        pmf = np.zeros(2)
        pmf[int(bit)] = 1.0
        return cls(pmf)

    @property
    def bit(self):
        return int(np.argmax(self.pmf))


def one_hot(bits):
    """(K,) bits -> (K, 2) target PMFs."""
    bits = np.asarray(bits, dtype=np.int64)
    rows = [OneHotTarget.from_bit(b).pmf for b in bits.ravel()]
    return np.array(rows, dtype=np.float64).reshape(bits.shape + (2,))


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 40
    sequence_length: int = 120
    clip_norm: float = 5.0
    seed: int = 0
    prob_floor: float = 1e-12
    val_fraction: float = 0.1
    batch_size: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class RnnModel(nn.Module):
    def __init__(self, cell_kind="lstm", input_dim=15, state_dim=16):
        super(RnnModel, self).__init__()
        if cell_kind not in CELL_KINDS:
            raise ValueError('Unknown cell kind "%s"' % cell_kind)
        self.cell_kind = cell_kind
        self.input_dim = input_dim
        self.state_dim = state_dim
        rows = 4 * state_dim if cell_kind == "lstm" else state_dim

        self.W = nn.Parameter(torch.zeros(rows, state_dim, dtype=DTYPE))
        self.U = nn.Parameter(torch.zeros(rows, input_dim, dtype=DTYPE))
        self.b = nn.Parameter(torch.zeros(rows, dtype=DTYPE))
        self.V = nn.Parameter(torch.zeros(2, state_dim, dtype=DTYPE))
        self.c = nn.Parameter(torch.zeros(2, dtype=DTYPE))
        self.register_buffer("input_mean", torch.zeros(input_dim, dtype=DTYPE))
        self.register_buffer("input_scale", torch.ones(input_dim, dtype=DTYPE))
        self.loss_curve = []

    def reset_parameters(self, seed=0):
        """uniform(-r, r), r = 1/sqrt(state_dim); LSTM forget-gate bias 1."""
        gen = torch.Generator().manual_seed(int(seed))
        r = 1.0 / math.sqrt(self.state_dim)
        with torch.no_grad():
            for name in PARAM_NAMES:
                p = getattr(self, name)
                p.copy_(torch.rand(p.shape, generator=gen, dtype=DTYPE) * 2 * r - r)
            if self.cell_kind == "lstm":
                S = self.state_dim
                self.b[S:2 * S] = 1.0
        return self

    def initial_state(self, batch=1):
        h = torch.zeros(batch, self.state_dim, dtype=DTYPE)
        if self.cell_kind == "lstm":
            return (h, torch.zeros(batch, self.state_dim, dtype=DTYPE))
        return h

    def standardize(self, Y):
        return (Y - self.input_mean) / self.input_scale

    def step(self, state, y):
        """Batched cell update: state (B, S) or pair, y (B, I) -> (state, logits (B, 2))."""
        if self.cell_kind == "vanilla":
            h = torch.tanh(self.b + state @ self.W.t() + y @ self.U.t())
            new_state = h
        else:
            h_prev, cell_prev = state
            S = self.state_dim
            z = self.b + h_prev @ self.W.t() + y @ self.U.t()
            i = torch.sigmoid(z[:, :S])
            f = torch.sigmoid(z[:, S:2 * S])
            g = torch.tanh(z[:, 2 * S:3 * S])
            o = torch.sigmoid(z[:, 3 * S:])
            cell = f * cell_prev + i * g
            h = o * torch.tanh(cell)
            new_state = (h, cell)
        return new_state, self.c + h @ self.V.t()

    def forward(self, Y):
        """Y (B, K, I) standardized with the stored statistics -> logits (B, K, 2)."""
        Y = self.standardize(Y)
        state = self.initial_state(Y.shape[0])
        logits = []
        for k in range(Y.shape[1]):
            state, o = self.step(state, Y[:, k])
            logits.append(o)
        return torch.stack(logits, dim=1)


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def _check_dim(model, y):
    if y.shape[-1] != model.input_dim:
        raise ValueError("input has %d features, model expects %d" % (y.shape[-1], model.input_dim))


def cell_step(model, h_prev, y):
    """One cell update on a raw feature vector, standardized like forward(); returns (state, pmf)."""
    y = _as_tensor(y)
    _check_dim(model, y)
    y = model.standardize(y)
    single = y.dim() == 1
    if single:
        y = y.unsqueeze(0)
    if h_prev is None:
        h_prev = model.initial_state(y.shape[0])
    elif model.cell_kind == "lstm":
        h_prev = tuple(_as_tensor(s).reshape(y.shape[0], model.state_dim) for s in h_prev)
    else:
        h_prev = _as_tensor(h_prev).reshape(y.shape[0], model.state_dim)
    state, logits = model.step(h_prev, y)
    pmf = torch.softmax(logits, dim=-1)
    if single:
        pmf = pmf[0]
        state = tuple(s[0] for s in state) if isinstance(state, tuple) else state[0]
    return state, pmf


def forward_sequence(model, Y):
    """PMFs (K, 2) for one sequence (K, I), or (B, K, 2) for a batch, starting from h0 = 0."""
    Y = _as_tensor(Y)
    single = Y.dim() == 2
    if single:
        Y = Y.unsqueeze(0)
    if Y.shape[1] == 0:
        raise ValueError("empty input sequence")
    _check_dim(model, Y)
    pmfs = torch.softmax(model(Y), dim=-1)
    return pmfs[0] if single else pmfs


def _target_tensor(targets):
    if isinstance(targets, torch.Tensor):
        return targets
    if len(targets) and isinstance(targets[0], OneHotTarget):
        targets = [t.pmf for t in targets]
    return torch.as_tensor(np.asarray(targets))


def sequence_loss(pmfs, targets, floor=0.0):
    """-sum_i log pmf_i[label_i]; targets are bit labels, one-hot rows or OneHotTargets."""
    pmfs = _as_tensor(pmfs)
    targets = _target_tensor(targets)
    if targets.is_floating_point() and targets.shape == pmfs.shape:
        labels = targets.argmax(dim=-1)
    else:
        labels = targets.long()
    if labels.shape != pmfs.shape[:-1]:
        raise ValueError("targets do not match the PMF sequence length")
    picked = pmfs.gather(-1, labels.unsqueeze(-1)).squeeze(-1)
    if floor > 0:
        picked = picked.clamp_min(floor)
    return -torch.log(picked).sum()


def backward_sequence(model, Y, targets, floor=1e-12):
    """Gradient of sequence_loss w.r.t. every parameter, keyed by parameter name."""
    model.zero_grad()
    loss = sequence_loss(forward_sequence(model, Y), targets, floor=floor)
    loss.backward()
    return {name: p.grad.detach().clone() for name, p in model.named_parameters()}


def detect_sequence(model, Y):
    """Most probable bit per step; an exact tie decides 0."""
    with torch.no_grad():
        pmfs = forward_sequence(model, Y)
    return pmfs.argmax(dim=-1).numpy().astype(np.int64)


def fit_standardization(model, sequences):
    X = np.concatenate([np.asarray(Y, dtype=np.float64) for Y, _ in sequences])
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    with torch.no_grad():
        model.input_mean.copy_(torch.from_numpy(mean))
        model.input_scale.copy_(torch.from_numpy(scale))


def dataset_loss(model, sequences, floor):
    with torch.no_grad():
        total = sum(float(sequence_loss(forward_sequence(model, Y), y, floor=floor))
                    for Y, y in sequences)
    return total / max(1, sum(len(y) for _, y in sequences))


def _batches(sequences, order, batch_size):
    for start in range(0, len(order), batch_size):
        chunk = [sequences[i] for i in order[start:start + batch_size]]
        lengths = {len(y) for _, y in chunk}
        if len(lengths) == 1:
            yield [(np.stack([Y for Y, _ in chunk]), np.stack([y for _, y in chunk]))]
        else:
            yield chunk


def train_rnn(dataset, cfg, cell_kind="lstm", state_dim=16, val_dataset=None, writer=None,
              progress=True):
    """SGD with gradient clipping; returns the model at its best validation loss."""
    if not dataset:
        raise ValueError("empty training dataset")
    sequences = [(np.asarray(Y, dtype=np.float64), np.asarray(y, dtype=np.int64)) for Y, y in dataset]
    input_dim = sequences[0][0].shape[1]
    if any(Y.shape[1] != input_dim or len(Y) != len(y) for Y, y in sequences):
        raise ValueError("inconsistent sequence dimensions")

    rng = np.random.default_rng(cfg.seed)
    if val_dataset is None:
        n_val = int(round(cfg.val_fraction * len(sequences)))
        if len(sequences) >= 2:
            n_val = min(max(1, n_val), len(sequences) - 1)
            perm = rng.permutation(len(sequences))
            val_dataset = [sequences[i] for i in sorted(perm[:n_val])]
            sequences = [sequences[i] for i in sorted(perm[n_val:])]
        else:
            val_dataset = sequences

    model = RnnModel(cell_kind=cell_kind, input_dim=input_dim, state_dim=state_dim)
    model.reset_parameters(cfg.seed)
    fit_standardization(model, sequences)
    sequences = [(Y, one_hot(y)) for Y, y in sequences]

    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate)
    scheduler = HalveOnIncreaseSchedule(optimizer)

    logger.info("***** Running RNN training *****")
    logger.info("  Cell = %s, state size = %d", cell_kind, state_dim)
    logger.info("  Num sequences = %d (+%d validation)", len(sequences), len(val_dataset))
    logger.info("  Num epochs = %d", cfg.epochs)

    best_val, best_state = math.inf, copy.deepcopy(model.state_dict())
    curve = []
    losses = AverageMeter()
    global_step = 0
    epoch_iterator = tqdm(range(cfg.epochs), desc="Training (loss=X.X)", bar_format="{l_bar}{r_bar}",
                          dynamic_ncols=True, disable=not progress)
    for epoch in epoch_iterator:
        losses.reset()
        order = rng.permutation(len(sequences))
        for batch in _batches(sequences, order, cfg.batch_size):
            optimizer.zero_grad()
            loss = 0
            n_bits = 0
            for Y, y in batch:
                loss = loss + sequence_loss(forward_sequence(model, Y), y, floor=cfg.prob_floor)
                n_bits += y.size // 2
            if not torch.isfinite(loss):
                raise NonFiniteLoss(epoch, global_step, float(loss))
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
            optimizer.step()
            losses.update(float(loss) / n_bits, n_bits)
            global_step += 1

        val_loss = dataset_loss(model, val_dataset, cfg.prob_floor)
        curve.append((epoch, losses.avg, val_loss))
        if writer is not None:
            writer.add_scalar("train/loss", scalar_value=losses.avg, global_step=epoch)
            writer.add_scalar("val/loss", scalar_value=val_loss, global_step=epoch)
            writer.add_scalar("train/lr", scalar_value=scheduler.get_lr()[0], global_step=epoch)
        if val_loss < best_val:
            best_val, best_state = val_loss, copy.deepcopy(model.state_dict())
        scheduler.step(losses.avg)
        epoch_iterator.set_description("Training (loss=%2.5f, val=%2.5f)" % (losses.avg, val_loss))

    model.load_state_dict(best_state)
    model.loss_curve = curve
    logger.info("Best validation loss: \t%f" % best_val)
    return model
