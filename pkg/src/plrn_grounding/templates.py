from typing import List, Sequence

TEMPLATE_WORDS = ("a", "person", "the", "and", "then")

SIGNAL_WORDS = (
    "opens", "closes", "holds", "throws", "eats", "drinks", "washes", "sits",
    "door", "window", "cup", "book", "towel", "phone", "laptop", "shoes",
    "laughs", "sneezes", "cooks", "pours", "tidies", "watches", "dresses", "fixes",
)

FILLER_WORDS = (
    "slowly", "quickly", "again", "briefly", "there", "inside", "near", "some",
    "while", "still", "just", "also", "very", "over", "here", "once",
)


def vocabulary_words(size: int, signal_count: int) -> List[str]:
    """Template, signal and filler words, padded with ``word<k>`` up to ``size``."""
    signal = list(SIGNAL_WORDS[:signal_count])
    signal += [f"signal{k}" for k in range(len(signal), signal_count)]
    words = list(TEMPLATE_WORDS) + signal + list(FILLER_WORDS)
    k = 0
    while len(words) < size:
        words.append(f"word{k}")
        k += 1
    return words[:max(size, len(TEMPLATE_WORDS) + signal_count)]


######################
# Grounding Queries  #
######################
def get_query(signal: Sequence[str], filler: Sequence[str] = ()) -> str:
    """Create a template query around 1-3 signal words.

    Args:
        signal: signal words that key the planted pattern
        filler: uninformative words appended to the query

    Returns:
        A lowercase query such as "a person opens the door and sits"
    """
    if len(signal) == 1:
        words = ["a", "person", signal[0], "the"]
    elif len(signal) == 2:
        words = ["a", "person", signal[0], "the", signal[1]]
    else:
        words = ["a", "person", signal[0], "the", signal[1], "and", "then", *signal[2:]]
    return " ".join([*words, *filler])
