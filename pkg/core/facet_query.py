"""
Язык ограничений на фасеты и сопоставление интересов

Поддерживается подмножество XPath:
    /a/b[@x='v']/c            абсолютный путь
    //operation[@name='f']    поиск по потомкам (только в начале)
    /QoS/response[case='worst']/time[@format='ms'] < 100
    /SoapTest[count(testcase) > 10]

Сравнение записывается после пути; текст выбранного узла приводится
к числу, нечисловой текст не совпадает.
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from core.errors import EmptyExpression, UnsupportedSyntax
from core.messages import AddInfoMessage, ServiceMessage
from core.schemas import DEFAULT_CATALOG, SchemaCatalog
from core.service_model import ElementId, Facet, FacetXML, ServiceEntry, XmlElement

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(
    r"""
    (?P<dslash>//)
    |(?P<slash>/)
    |(?P<op><=|>=|≤|≥|<|>|=)
    |(?P<lbr>\[)|(?P<rbr>\])
    |(?P<lpar>\()|(?P<rpar>\))
    |(?P<at>@)
    |(?P<str>'[^']*'|"[^"]*")
    |(?P<num>[+-]?(?:\d+(?:\.\d*)?|\.\d+))
    |(?P<name>[A-Za-z_][\w.\-]*)
    """,
    re.VERBOSE,
)

_NUMBER_RE = re.compile(r"^\s*[+-]?(\d+(\.\d*)?|\.\d+)\s*$")


class Axis(Enum):
    ROOT = "/"
    DESCENDANT = "//"


class Op(Enum):
    LT = "<"
    GT = ">"
    EQ = "="
    LE = "<="
    GE = ">="

    @classmethod
    def parse(cls, token: str) -> "Op":
        return cls({"≤": "<=", "≥": ">="}.get(token, token))

    def apply(self, left, right) -> bool:
        if self is Op.LT:
            return left < right
        if self is Op.GT:
            return left > right
        if self is Op.LE:
            return left <= right
        if self is Op.GE:
            return left >= right
        return left == right


def _quote(value: str) -> str:
    return f'"{value}"' if "'" in value else f"'{value}'"


def _format_number(value: float) -> str:
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return np.format_float_positional(value, trim="-")


def to_number(text: Optional[str]) -> Optional[float]:
    """Десятичное число из текста узла или None"""
    if text is None or not _NUMBER_RE.match(text):
        return None
    return float(text)


# ---------------------------------------------------------------------------
# Выражения
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttrEquals:
    name: str
    value: str

    def test(self, node: XmlElement) -> bool:
        return node.attr(self.name) == self.value

    def __str__(self) -> str:
        return f"@{self.name}={_quote(self.value)}"


@dataclass(frozen=True)
class ChildTextEquals:
    child: str
    value: str

    def test(self, node: XmlElement) -> bool:
        return any((c.text or "") == self.value for c in node.children_named(self.child))

    def __str__(self) -> str:
        return f"{self.child}={_quote(self.value)}"


@dataclass(frozen=True)
class CountCompare:
    child: str
    op: Op
    value: float

    def test(self, node: XmlElement) -> bool:
        return self.op.apply(len(node.children_named(self.child)), self.value)

    def __str__(self) -> str:
        return f"count({self.child}) {self.op.value} {_format_number(self.value)}"


Predicate = Union[AttrEquals, ChildTextEquals, CountCompare]


@dataclass(frozen=True)
class Step:
    name: str
    predicate: Optional[Predicate] = None

    def accepts(self, node: XmlElement) -> bool:
        return node.name == self.name and (self.predicate is None or self.predicate.test(node))

    def __str__(self) -> str:
        return self.name if self.predicate is None else f"{self.name}[{self.predicate}]"


@dataclass(frozen=True)
class Comparison:
    op: Op
    literal: Union[float, str]

    def test(self, node: XmlElement) -> bool:
        if isinstance(self.literal, str):
            return self.op.apply(node.text or "", self.literal)
        number = to_number(node.text)
        if number is None:
            return False
        return self.op.apply(number, self.literal)

    def __str__(self) -> str:
        if isinstance(self.literal, str):
            return f"{self.op.value} {_quote(self.literal)}"
        return f"{self.op.value} {_format_number(self.literal)}"


@dataclass(frozen=True)
class PathExpr:
    """Разобранное выражение пути"""
    axis: Axis
    steps: Tuple[Step, ...]
    comparison: Optional[Comparison] = None

    def __post_init__(self):
        if not self.steps:
            raise EmptyExpression("Выражение должно содержать хотя бы один шаг")

    def __str__(self) -> str:
        text = self.axis.value + "/".join(str(s) for s in self.steps)
        if self.comparison is not None:
            text += f" {self.comparison}"
        return text


# ---------------------------------------------------------------------------
# Разбор
# ---------------------------------------------------------------------------

def _tokenize(text: str) -> List[Tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise UnsupportedSyntax(f"Неподдерживаемый символ {text[pos]!r} в позиции {pos}: {text}")
        tokens.append((m.lastgroup, m.group()))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, offset: int = 0) -> Tuple[Optional[str], str]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else (None, "")

    def expect(self, kind: str) -> str:
        got_kind, value = self.peek()
        if got_kind != kind:
            found = value or "конец выражения"
            raise UnsupportedSyntax(f"Ожидался {kind}, найдено {found!r}: {self.text}")
        self.pos += 1
        return value

    def parse(self) -> PathExpr:
        kind, _ = self.peek()
        if kind == "dslash":
            axis = Axis.DESCENDANT
        elif kind == "slash":
            axis = Axis.ROOT
        else:
            raise UnsupportedSyntax(f"Путь должен начинаться с / или //: {self.text}")
        self.pos += 1

        steps = [self.step()]
        while self.peek()[0] == "slash":
            self.pos += 1
            steps.append(self.step())
        if self.peek()[0] == "dslash":
            raise UnsupportedSyntax(f"// допускается только в начале пути: {self.text}")

        comparison = None
        if self.peek()[0] == "op":
            op = Op.parse(self.expect("op"))
            comparison = Comparison(op, self.literal())
        if self.peek()[0] is not None:
            raise UnsupportedSyntax(f"Лишний фрагмент {self.peek()[1]!r}: {self.text}")
        return PathExpr(axis=axis, steps=tuple(steps), comparison=comparison)

    def step(self) -> Step:
        name = self.expect("name")
        predicate = None
        if self.peek()[0] == "lbr":
            self.pos += 1
            predicate = self.predicate()
            self.expect("rbr")
        return Step(name, predicate)

    def predicate(self) -> Predicate:
        kind, value = self.peek()
        if kind == "at":
            self.pos += 1
            name = self.expect("name")
            self._expect_eq()
            return AttrEquals(name, self.string())
        if kind == "name" and value == "count" and self.peek(1)[0] == "lpar":
            self.pos += 2
            child = self.expect("name")
            self.expect("rpar")
            op = Op.parse(self.expect("op"))
            return CountCompare(child, op, float(self.expect("num")))
        if kind == "name":
            self.pos += 1
            self._expect_eq()
            return ChildTextEquals(value, self.string())
        raise UnsupportedSyntax(f"Неподдерживаемый предикат {value!r}: {self.text}")

    def _expect_eq(self) -> None:
        if self.expect("op") != "=":
            raise UnsupportedSyntax(f"В предикате допускается только '=': {self.text}")

    def string(self) -> str:
        return self.expect("str")[1:-1]

    def literal(self) -> Union[float, str]:
        kind, _ = self.peek()
        if kind == "num":
            return float(self.expect("num"))
        if kind == "str":
            return self.string()
        raise UnsupportedSyntax(f"Ожидался литерал сравнения: {self.text}")


def parse_path(text: str) -> PathExpr:
    """
    Разобрать выражение пути

    Args:
        text: Выражение в поддерживаемом подмножестве XPath

    Returns:
        PathExpr; str(expr) разбирается в равное выражение
    """
    if text is None or not text.strip():
        raise EmptyExpression("Пустое выражение пути")
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Вычисление
# ---------------------------------------------------------------------------

def select(expr: PathExpr, root: XmlElement) -> List[XmlElement]:
    """Узлы, выбранные шагами выражения (без учёта сравнения)"""
    first, rest = expr.steps[0], expr.steps[1:]
    if expr.axis is Axis.ROOT:
        current = [root] if first.accepts(root) else []
    else:
        current = [n for n in root.iter() if first.accepts(n)]
    for step in rest:
        current = [c for node in current for c in node.children if step.accepts(c)]
        if not current:
            break
    return current


def eval_path(expr: PathExpr, doc: Union[FacetXML, XmlElement]) -> bool:
    """Истина, если хотя бы один выбранный узел удовлетворяет сравнению"""
    root = doc.root if isinstance(doc, FacetXML) else doc
    nodes = select(expr, root)
    if expr.comparison is None:
        return bool(nodes)
    return any(expr.comparison.test(n) for n in nodes)


# ---------------------------------------------------------------------------
# Интересы
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubConstraint:
    """Ограничение на фасеты одной схемы"""
    schema_id: str
    expr: PathExpr

    def __post_init__(self):
        if not self.schema_id:
            raise ValueError("schema_id ограничения не может быть пустым")

    @classmethod
    def parse(cls, schema_id: str, text: str) -> "SubConstraint":
        return cls(schema_id, parse_path(text))

    def __str__(self) -> str:
        return f"{self.schema_id}:{self.expr}"


@dataclass(frozen=True)
class ById:
    service_id: ElementId

    def __str__(self) -> str:
        return f"id={self.service_id}"


@dataclass(frozen=True)
class ByConstraints:
    conjuncts: Tuple[SubConstraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "conjuncts", tuple(self.conjuncts))
        if not self.conjuncts:
            raise EmptyExpression("Интерес должен содержать хотя бы одно ограничение")

    def __str__(self) -> str:
        return " & ".join(str(c) for c in self.conjuncts)


@dataclass(frozen=True)
class AddInfoInterest:
    service_id: ElementId
    schema_id: str
    expr: PathExpr

    def __post_init__(self):
        if not self.schema_id:
            raise ValueError("schema_id ограничения не может быть пустым")

    def __str__(self) -> str:
        return f"addinfo({self.service_id}) {self.schema_id}:{self.expr}"


Interest = Union[ById, ByConstraints, AddInfoInterest]


MATCH_KINDS = ("service", "add_info", "federation")


@dataclass
class MatchStats:
    """Счётчики сопоставления: разборы документов, вычисления путей, исходы"""
    parses: int = 0
    path_evaluations: int = 0
    conjuncts_evaluated: int = 0
    outcomes: Dict[str, List[int]] = field(
        default_factory=lambda: {k: [0, 0] for k in MATCH_KINDS}
    )
    conjuncts_by_kind: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in MATCH_KINDS})
    per_interest: Dict[str, List[int]] = field(default_factory=dict)

    def record(self, kind: str, matched: bool, key: Optional[str] = None) -> None:
        self.outcomes[kind][0 if matched else 1] += 1
        if key is not None:
            row = self.per_interest.setdefault(key, [0, 0, 0])
            row[0 if matched else 1] += 1

    def count_conjunct(self, kind: str, key: Optional[str] = None) -> None:
        self.conjuncts_evaluated += 1
        self.conjuncts_by_kind[kind] += 1
        if key is not None:
            self.per_interest.setdefault(key, [0, 0, 0])[2] += 1

    def evaluations(self, kind: str) -> int:
        return sum(self.outcomes[kind])


class MatchContext:
    """
    Контекст сопоставления одного сообщения на одном брокере.

    Документы фасетов декодируются не более одного раза, сколько бы
    интересов ни проверялось.
    """

    def __init__(
        self,
        payload,
        stats: Optional[MatchStats] = None,
        catalog: SchemaCatalog = DEFAULT_CATALOG,
    ):
        self.payload = payload
        self.stats = stats if stats is not None else MatchStats()
        self.catalog = catalog
        self._facets: Optional[Tuple[Facet, ...]] = None

    def facets(self) -> Tuple[Facet, ...]:
        if self._facets is None:
            self.stats.parses += 1
            if isinstance(self.payload, ServiceMessage):
                self._facets = self.payload.decode_facets(self.catalog)
            elif isinstance(self.payload, AddInfoMessage):
                self._facets = (self.payload.decode_facet(self.catalog),)
            else:
                self._facets = ()
        return self._facets


def _any_facet_satisfies(facets: Iterable[Facet], schema_id: str, expr: PathExpr, stats: MatchStats) -> bool:
    for facet in facets:
        if facet.schema_id != schema_id:
            continue
        stats.path_evaluations += 1
        if eval_path(expr, facet.content):
            return True
    return False


def match_service(
    interest: Interest,
    msg: ServiceMessage,
    ctx: Optional[MatchContext] = None,
    key: Optional[str] = None,
) -> bool:
    """
    Сопоставить интерес с сообщением о сервисе

    Args:
        interest: ById / ByConstraints (AddInfoInterest никогда не совпадает)
        msg: Сообщение с фасетами спецификации
        ctx: Контекст сообщения (кэш разбора и счётчики)
        key: Ключ интереса для постатейной статистики

    Returns:
        True при совпадении
    """
    ctx = ctx or MatchContext(msg)
    stats = ctx.stats
    if isinstance(interest, ById):
        matched = interest.service_id == msg.service_id
    elif isinstance(interest, ByConstraints):
        matched = True
        for conjunct in interest.conjuncts:
            stats.count_conjunct("service", key)
            if not _any_facet_satisfies(ctx.facets(), conjunct.schema_id, conjunct.expr, stats):
                matched = False
                break
    else:
        return False
    stats.record("service", matched, key)
    return matched


def match_add_info(
    interest: Interest,
    msg: AddInfoMessage,
    ctx: Optional[MatchContext] = None,
    key: Optional[str] = None,
) -> bool:
    """Сначала id сервиса, затем схема, затем выражение"""
    if not isinstance(interest, AddInfoInterest):
        return False
    ctx = ctx or MatchContext(msg)
    stats = ctx.stats
    stats.count_conjunct("add_info", key)
    if msg.service_ref != interest.service_id or msg.schema_id != interest.schema_id:
        matched = False
    else:
        matched = _any_facet_satisfies(ctx.facets(), interest.schema_id, interest.expr, stats)
    stats.record("add_info", matched, key)
    return matched


def match_entry(interest: Interest, entry: ServiceEntry) -> bool:
    """Сопоставление с уже хранимым сервисом (запросы к локальному реестру)"""
    stats = MatchStats()
    if isinstance(interest, ById):
        return entry.id == interest.service_id
    if isinstance(interest, ByConstraints):
        return all(
            _any_facet_satisfies(entry.spec_facets, c.schema_id, c.expr, stats)
            for c in interest.conjuncts
        )
    if entry.id != interest.service_id:
        return False
    return _any_facet_satisfies(entry.add_info_facets, interest.schema_id, interest.expr, stats)
