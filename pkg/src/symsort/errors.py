class SymsortError(Exception):
    pass


class InvalidSpec(SymsortError, ValueError):
    pass


class FrontierOverflow(SymsortError):
    pass


class DepthCapExceeded(SymsortError):
    pass


class TailBoundUnavailable(SymsortError):
    pass


class InsufficientSamples(SymsortError, ValueError):
    pass
