from collections.abc import Sequence

from tessera.structure import LAYER1_ALPHABET_SIZE, Symbol


def render_symbols(symbols: Sequence[Symbol]) -> str:
    """`"23754"` for first-layer symbols, `"65 130 67"` once any symbol needs more than one hex digit"""
    if all(symbol < LAYER1_ALPHABET_SIZE for symbol in symbols):
        return "".join(f"{symbol:x}" for symbol in symbols)
    return " ".join(str(symbol) for symbol in symbols)


def render_weights(weights: Sequence[float]) -> str:
    return " ".join(f"{weight:.3g}" for weight in weights)


def parse_symbols(text: str) -> tuple[Symbol, ...]:
    """Inverse of `render_symbols`; whitespace separates decimal symbols, otherwise every char is a hex digit"""
    text = text.strip()
    if any(char.isspace() for char in text):
        return tuple(int(part) for part in text.split())
    return tuple(int(char, 16) for char in text)
