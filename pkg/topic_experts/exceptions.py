class TopicExpertsError(Exception):
    pass


class OntologyParseError(TopicExpertsError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class OntologyValidationError(TopicExpertsError):
    def __init__(self, message, record=None):
        self.record = record
        if record is not None:
            message = f"{message} (record {record!r})"
        super().__init__(message)


class CatalogError(TopicExpertsError):
    pass


class NNLSInputError(TopicExpertsError, ValueError):
    pass


class NNLSConvergenceError(TopicExpertsError):
    def __init__(self, message, best=None, residual=None):
        self.best = best
        self.residual = residual
        super().__init__(message)


class ConfigError(TopicExpertsError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class MissingArtifactError(TopicExpertsError):
    def __init__(self, artifact, stage=None):
        self.artifact = str(artifact)
        self.stage = stage
        where = f" required by '{stage}'" if stage else ""
        super().__init__(f"Missing artifact {self.artifact}{where}")


class TopicNotFound(TopicExpertsError, LookupError):
    pass


class UserNotFound(TopicExpertsError, LookupError):
    pass


class GroundTruthError(TopicExpertsError, ValueError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
