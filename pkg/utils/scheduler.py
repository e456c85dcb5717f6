import logging

logger = logging.getLogger(__name__)


class HalveOnIncreaseSchedule(object):
    """ Loss-driven learning rate schedule.
        Multiplies every param group's learning rate by `factor` (0.5) whenever the
        epoch loss passed to `step` is larger than the one passed before it.
    """
    def __init__(self, optimizer, factor=0.5, min_lr=0.0):
        self.optimizer = optimizer
        self.factor = factor
        self.min_lr = min_lr
        self.last_loss = None
        self.num_decays = 0

    def step(self, epoch_loss):
        if self.last_loss is not None and epoch_loss > self.last_loss:
            for group in self.optimizer.param_groups:
                group["lr"] = max(group["lr"] * self.factor, self.min_lr)
            self.num_decays += 1
            logger.info("Epoch loss rose %.5f -> %.5f, learning rate now %g",
                        self.last_loss, epoch_loss, self.get_lr()[0])
        self.last_loss = epoch_loss

    def get_lr(self):
        return [group["lr"] for group in self.optimizer.param_groups]

    def state_dict(self):
        return {"last_loss": self.last_loss, "num_decays": self.num_decays}

    def load_state_dict(self, state):
        self.last_loss = state["last_loss"]
        self.num_decays = state["num_decays"]
