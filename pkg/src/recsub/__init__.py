"""Equality and subtyping for equirecursive types with F-bounded quantification."""

from .automata import automataof, generate, subtype_automata
from .coinductive import check, explain
from .parser import parse_query_file, parse_type, print_type
from .syntax import GlobalEnv, Relation, from_core, to_core
from .trees import oracle_check, treeof

__all__ = [
    "GlobalEnv", "Relation", "automataof", "check", "explain", "from_core",
    "generate", "oracle_check", "parse_query_file", "parse_type", "print_type",
    "subtype_automata", "to_core", "treeof",
]
