class Stage:
    """One step of a processing chain.

    Stages compose right-to-left with `@`, so `b @ a` runs `a` first.
    """

    name = "stage"

    def __init__(self, logger=None):
        self.children = []
        self.log_info = {}
        self.logger = logger  # optional run logger

    def __str__(self):
        return " -> ".join(stage.name for stage in self.stages)

    @property
    def stages(self):
        return [self]

    def forward(self, x):
        raise NotImplementedError

    def trace(self, x):
        # Input --> list of every intermediate output, last one is the result
        return [self(x)]

    def __matmul__(self, other):
        return CompositeStage(self, other)

    def __call__(self, x):
        self.log_info = {}
        out = self.forward(x)
        if self.logger is not None:
            self.logger.log_stage(self.name, **self.log_info)
        return out


class CompositeStage(Stage):
    def __init__(self, m1, m0):
        super().__init__()
        self.children = (m0, m1)
        self.name = f"{m0.name}+{m1.name}"

    @property
    def stages(self):
        m0, m1 = self.children
        return m0.stages + m1.stages

    def forward(self, x):
        m0, m1 = self.children
        return m1(m0(x))

    def trace(self, x):
        m0, m1 = self.children
        outputs = m0.trace(x)
        return outputs + m1.trace(outputs[-1])

    def __call__(self, x):
        return self.forward(x)
