class MogfitError(Exception):
    """A library error. `kind` is e.g. "validation" or "divergence"; `stage`
    names the pipeline stage when known."""

    def __init__(self, message, kind=None, stage=None):
        super().__init__(message)
        self.kind = kind
        self.stage = stage

    @property
    def is_input_error(self):
        return self.kind in ("validation", "domain", "unsupported")
