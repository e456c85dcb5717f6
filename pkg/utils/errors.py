class PhLinkError(Exception):
    """Base class for every error raised by the link simulator and detectors."""


class InvalidSchedule(PhLinkError):
    pass


class InvalidConfig(PhLinkError):
    pass


class SyncNotFound(PhLinkError):
    pass


class TraceTooShort(PhLinkError):
    def __init__(self, available, requested):
        super(TraceTooShort, self).__init__(
            "trace holds %d complete symbols, %d requested" % (available, requested))
        self.available = available
        self.requested = requested


class WindowTooShort(PhLinkError):
    pass


class DegenerateTraining(PhLinkError):
    pass


class NoConvergence(PhLinkError):
    def __init__(self, iterations, violation):
        super(NoConvergence, self).__init__(
            "SMO stopped after %d pair updates, KKT violation %.3e" % (iterations, violation))
        self.iterations = iterations
        self.violation = violation


class NonFiniteLoss(PhLinkError):
    def __init__(self, epoch, step, loss):
        super(NonFiniteLoss, self).__init__(
            "non-finite loss %r at epoch %d, step %d" % (loss, epoch, step))
        self.epoch = epoch
        self.step = step
        self.loss = loss


class InsufficientRecords(PhLinkError):
    def __init__(self, interval_ms, count):
        super(InsufficientRecords, self).__init__(
            "interval %d ms has %d experiment(s), at least 2 needed to split" % (interval_ms, count))
        self.interval_ms = interval_ms
        self.count = count


class DataLeakage(PhLinkError):
    pass


class ModelNotFound(PhLinkError):
    def __init__(self, path):
        super(ModelNotFound, self).__init__("no model file at %s" % path)
        self.path = path
