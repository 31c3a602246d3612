"""Exception hierarchy shared by the pipeline stages."""


class ProgEmbedError(Exception):
    """Base class for every error raised by this package."""


class PositionalError(ProgEmbedError):
    """An error tied to a character or token offset."""

    def __init__(self, position, message=""):
        self.position = position
        text = f"at position {position}"
        if message:
            text = f"{message} ({text})"
        super().__init__(text)


# corpus
class UnbalancedDelimiters(PositionalError):
    pass


class BracelessBody(PositionalError):
    """A control statement whose body is not wrapped in braces."""


class InvalidShape(ProgEmbedError, ValueError):
    pass


class EmptyCorpus(ProgEmbedError, ValueError):
    pass


class NoMethodsFound(ProgEmbedError):
    pass


# lexer
class UnterminatedLiteral(PositionalError):
    pass


class IllegalCharacter(PositionalError):
    pass


class UnknownLexeme(ProgEmbedError, KeyError):
    def __init__(self, lexeme, position):
        self.lexeme = lexeme
        self.position = position
        super().__init__(f"lexeme {lexeme!r} at token {position} is not in the vocabulary")

    def __str__(self):
        return self.args[0]


class EmptySequence(ProgEmbedError, ValueError):
    pass


class IndexOutOfRange(ProgEmbedError, IndexError):
    pass


# flowgraph
class MalformedStructure(PositionalError):
    pass


# neuralnet / training
class DimensionMismatch(ProgEmbedError, ValueError):
    pass


# Gradient and loss code reports shape problems under this name.
ShapeMismatch = DimensionMismatch


class NonFiniteLoss(ProgEmbedError, FloatingPointError):
    def __init__(self, epoch, method):
        self.epoch = epoch
        self.method = method
        super().__init__(f"non-finite loss in epoch {epoch} on method {method!r}")


class ChecksumMismatch(ProgEmbedError):
    pass
