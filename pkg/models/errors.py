class PolyharmonicError(Exception):
    def __init__(self, message: str):
        self.message = message
        super().__init__(message)

class DimensionMismatch(PolyharmonicError):
    pass

class CoincidentPoints(PolyharmonicError):
    pass

class OutsideDomain(PolyharmonicError):
    pass

class InfiniteProfile(PolyharmonicError):
    pass

class StepUnderflow(PolyharmonicError):
    pass

class PoleSingularity(PolyharmonicError):
    pass

class BudgetExceeded(PolyharmonicError):
    pass

class DegenerateCap(PolyharmonicError):
    pass

class MissingLaplacianPower(PolyharmonicError):
    pass

class NonMonotoneSequence(PolyharmonicError):
    pass

class ScheduleTooSmall(PolyharmonicError):
    pass

class NegativeInput(PolyharmonicError):
    pass

class PoleProximity(PolyharmonicError):
    pass

class IncompatibleLattice(PolyharmonicError):
    pass

class StepFailure(PolyharmonicError):
    pass

class BlowUp(PolyharmonicError):
    def __init__(self, message: str, escape_time: float):
        self.escape_time = escape_time
        super().__init__(message)

class NonFiniteValue(PolyharmonicError):
    pass
