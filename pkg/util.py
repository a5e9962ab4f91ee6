from hashlib import sha256
from os import makedirs
from os.path import join as path_join


SEED_BYTES = 8  # seeds are unsigned 64-bit

# seed namespaces, kept disjoint so train/validation/test episodes never overlap
TRAIN_NAMESPACE = 'train'
VALIDATION_NAMESPACE = 'valid'
TEST_NAMESPACE = 'test'
RESERVED_NAMESPACES = (TRAIN_NAMESPACE, VALIDATION_NAMESPACE)


def stable_seed(*parts) -> int:
    """Return a stable unsigned 64-bit seed derived from arbitrary parts.

    Parts are joined with `|` and hashed with SHA-256 (never Python's salted
    `hash()`), so the value is the same across processes and platforms.
    Example: `stable_seed(7, 'train', 3, 0)`
    """
    s = '|'.join(str(p) for p in parts).encode('utf-8')
    return int.from_bytes(sha256(s).digest()[:SEED_BYTES], 'big')


def training_seeds(master_seed, generation, count):
    """Episode seeds for one generation's training episodes."""
    return [stable_seed(master_seed, TRAIN_NAMESPACE, generation, i) for i in range(count)]

def validation_seeds(master_seed, count):
    """Episode seeds for validation; identical for every generation of a run."""
    return [stable_seed(master_seed, VALIDATION_NAMESPACE, i) for i in range(count)]

def namespaced_seeds(master_seed, namespace, count):
    """Episode seeds for post-hoc evaluation (test set, replay, ...).

    Training and validation namespaces are refused so evaluation never reuses
    episodes seen during a run.
    """
    if namespace in RESERVED_NAMESPACES:
        raise ValueError(f'Seed namespace "{namespace}" is reserved for training/validation.')
    return [stable_seed(master_seed, namespace, i) for i in range(count)]


def write_text(path, text):
    """Write text with '\\n' newlines regardless of platform (keeps runs byte-identical)."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)

def append_line(path, line):
    """Append a single line to a text file."""
    with open(path, 'a', encoding='utf-8', newline='\n') as f:
        f.write(line + '\n')

def read_text(path):
    with open(path, 'r', encoding='utf-8') as f:
        return f.read()


def ensure_dir(path):
    """Create directory (and parents) if missing, returning the path."""
    makedirs(path, exist_ok=True)
    return path

def run_file(run_dir, name):
    return path_join(run_dir, name)
