class QstockError(Exception):
    """Base class for every error raised by the laboratory."""


class OhlcFormatError(QstockError, ValueError):
    """Malformed or inconsistent OHLC input. Messages name the 1-based data row."""


class FetchError(QstockError):
    pass


class FetchNetworkError(FetchError):
    pass


class FetchStatusError(FetchError):
    def __init__(self, status_code: int, message: str):
        super().__init__(message)
        self.status_code = status_code


class SymbolNotFoundError(FetchError):
    pass


class EmptyPayloadError(FetchError):
    pass


class ConfigError(QstockError, ValueError):
    pass


class DatasetError(QstockError, ValueError):
    pass


class QuboError(QstockError, ValueError):
    pass


class CardinalityError(QuboError):
    pass


class KernelError(QstockError, ValueError):
    pass


class TrainingError(QstockError, ValueError):
    pass
