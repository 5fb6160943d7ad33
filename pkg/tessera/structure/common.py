from collections.abc import Iterable, Sequence
from typing import TypeAlias

from tessera.exceptions import InvalidSequenceError

Symbol: TypeAlias = int
Timestamp: TypeAlias = int
SymbolSequence: TypeAlias = tuple[Symbol, ...]

DELIMITER: Symbol = 0
LAYER1_ALPHABET_SIZE = 16


def decay_weight(w: float, t_now: Timestamp, t_last: Timestamp, lambda_: float) -> float:
    """Exponential fading: the weight halves every `1 / lambda_` ticks"""
    if t_now == t_last:
        return w
    return w * 2.0 ** (-lambda_ * (t_now - t_last))


def decay_factor(t_now: Timestamp, t_last: Timestamp, lambda_: float) -> float:
    return decay_weight(1.0, t_now, t_last, lambda_)


def as_sequence(symbols: Iterable[Symbol]) -> SymbolSequence:
    """Validate symbols as a model/query sequence: no delimiter and no consecutive repeats"""
    sequence = tuple(symbols)
    for index, symbol in enumerate(sequence):
        if symbol < 0:
            raise InvalidSequenceError(f"Symbols must be non-negative but got {symbol} at position {index}.")
        if symbol == DELIMITER:
            raise InvalidSequenceError(f"The delimiter symbol 0 cannot appear inside a sequence (position {index}).")
        if index and sequence[index - 1] == symbol:
            raise InvalidSequenceError(f"Symbol {symbol} is repeated at positions {index - 1} and {index}.")
    return sequence


def collapse_runs(symbols: Sequence[Symbol], weights: Sequence[float]) -> tuple[SymbolSequence, tuple[float, ...]]:
    """Fold runs of equal consecutive symbols into one, summing their weights"""
    collapsed_symbols: list[Symbol] = []
    collapsed_weights: list[float] = []
    for symbol, weight in zip(symbols, weights, strict=True):
        if collapsed_symbols and collapsed_symbols[-1] == symbol:
            collapsed_weights[-1] += weight
        else:
            collapsed_symbols.append(symbol)
            collapsed_weights.append(weight)
    return tuple(collapsed_symbols), tuple(collapsed_weights)


def drop_repeats(symbols: Iterable[Symbol]) -> SymbolSequence:
    result: list[Symbol] = []
    for symbol in symbols:
        if not result or result[-1] != symbol:
            result.append(symbol)
    return tuple(result)
