"""Exceptions raised by the normalizer package.

Numeric failures exit the CLI with code 1, usage and IO failures with code 2.
"""


class NormalizerError(Exception):
    exit_code = 1

    def to_dict(self):
        report = {"error": type(self).__name__, "message": str(self), "exit_code": self.exit_code}
        if getattr(self, "step", None) is not None:
            report["step"] = self.step
        return report


class NumericError(NormalizerError):
    exit_code = 1


class UsageError(NormalizerError, ValueError):
    exit_code = 2


class SmallDivisor(NumericError):

    def __init__(self, k, value, floor=None):
        self.k = tuple(int(x) for x in k)
        self.value = float(value)
        self.floor = floor
        message = f"|<k,omega>| = {self.value:.3e} below floor"
        if floor is not None:
            message += f" {floor:.3e}"
        super().__init__(f"{message} for mode k = {self.k}")

    def to_dict(self):
        report = super().to_dict()
        report.update({"k": list(self.k), "value": self.value})
        return report


class DegenerateTwist(NumericError):
    pass


class NoConvergence(NumericError):
    pass


class SingularJacobian(NumericError):
    pass


class NotElliptic(NumericError):
    pass


class DegenerateSpectrum(NumericError):
    pass


class NegativeAction(NumericError):
    pass


class KeplerNoConvergence(NumericError):
    pass


class CloseEncounter(NumericError):

    def __init__(self, time, distance):
        self.time = float(time)
        self.distance = float(distance)
        super().__init__(f"Mutual distance {self.distance:.3e} at t = {self.time:.6g}")


class PeakBelowNoise(NumericError):
    pass


class DimensionMismatch(UsageError):
    pass


class DomainError(UsageError):
    pass


class GridMismatch(UsageError):
    pass


class ManifestError(UsageError):
    pass


class ResonantTermRetained(UserWarning):

    def __init__(self, k, value):
        self.k = tuple(int(x) for x in k)
        self.value = float(value)
        super().__init__(f"Resonant mode k = {self.k} (|<k,omega>| = {self.value:.3e}) kept in the normal form")
