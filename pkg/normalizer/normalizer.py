class Normalizer:
    """Order-by-order normalization with a checkpoint after every completed order.

    Subclasses implement ``step`` (one order), ``result`` and the three
    checkpoint methods; ``order`` counts the completed orders.
    """

    def __init__(self) -> None:
        self.order = 0

    def step(self):
        raise NotImplementedError

    def result(self):
        raise NotImplementedError

    def normalize(self, order):
        while self.order < order:
            self.step()
            self.save_attributes()
            self.save_state()
        return self.result()

    def save_attributes(self):
        pass

    def save_state(self):
        pass

    def load_checkpoint(self):
        raise FileNotFoundError("No checkpoint for this normalizer")
