"""
Модель описания сервисов: фасеты, схемы, подписи, двухшаговое обновление

Сервис описывается набором фасетов. Фасет спецификации (Specification)
публикует только создатель сервиса, дополнительные фасеты (AdditionalInfo)
могут добавлять другие узлы, если создатель выставил allow_add_info.
Все значения неизменяемы; изменение элемента = удаление + создание с новым id.
"""
import hashlib
import hmac
import itertools
import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple, Union
from xml.sax.saxutils import escape

from core.errors import (
    AddInfoForbidden,
    DuplicateId,
    InvalidSignature,
    SchemaViolation,
    SpecByNonCreator,
    UnknownElement,
)
from core.lease import LeaseState

logger = logging.getLogger(__name__)

NodeId = str

_NAME_RE = re.compile(r"^[A-Za-z_][\w.\-]*$")


# ---------------------------------------------------------------------------
# Идентификаторы
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class ElementId:
    """Глобально уникальный идентификатор: `<node-id>:<counter>`"""
    value: str

    def __post_init__(self):
        node, sep, counter = self.value.rpartition(":")
        if not sep or not node or not counter.isdigit():
            raise ValueError(f"Некорректный ElementId: {self.value!r}")

    @property
    def node(self) -> NodeId:
        return self.value.rpartition(":")[0]

    @property
    def counter(self) -> int:
        return int(self.value.rpartition(":")[2])

    def __str__(self) -> str:
        return self.value


class IdGenerator:
    """Монотонный генератор идентификаторов узла"""

    def __init__(self, node_id: NodeId, start: int = 0):
        self.node_id = node_id
        self._counter = itertools.count(start + 1)

    def next_id(self) -> ElementId:
        return ElementId(f"{self.node_id}:{next(self._counter)}")


# ---------------------------------------------------------------------------
# XML-дерево и схемы
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XmlElement:
    """
    Элемент XML-подобного дерева.

    Атрибуты хранятся отсортированными по ключу, поэтому равенство деревьев
    не зависит от порядка вставки атрибутов.
    """
    name: str
    attrs: Tuple[Tuple[str, str], ...] = ()
    children: Tuple["XmlElement", ...] = ()
    text: Optional[str] = None

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ValueError(f"Некорректное имя элемента: {self.name!r}")
        attrs = self.attrs
        if isinstance(attrs, Mapping):
            attrs = attrs.items()
        normalized = tuple(sorted((str(k), str(v)) for k, v in attrs))
        keys = [k for k, _ in normalized]
        if len(set(keys)) != len(keys):
            raise ValueError(f"Повторяющиеся атрибуты у элемента {self.name}")
        for key in keys:
            if not _NAME_RE.match(key):
                raise ValueError(f"Некорректное имя атрибута: {key!r}")
        object.__setattr__(self, "attrs", normalized)
        object.__setattr__(self, "children", tuple(self.children))
        if self.text == "":
            object.__setattr__(self, "text", None)

    @classmethod
    def build(
        cls,
        name: str,
        attrs: Optional[Mapping[str, str]] = None,
        children: Iterable["XmlElement"] = (),
        text: Optional[str] = None,
    ) -> "XmlElement":
        return cls(name=name, attrs=tuple((attrs or {}).items()), children=tuple(children), text=text)

    @property
    def attributes(self) -> Dict[str, str]:
        return dict(self.attrs)

    def attr(self, key: str) -> Optional[str]:
        for k, v in self.attrs:
            if k == key:
                return v
        return None

    def iter(self) -> Iterator["XmlElement"]:
        """Обход в прямом порядке: сам элемент и все потомки"""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def children_named(self, name: str) -> List["XmlElement"]:
        return [c for c in self.children if c.name == name]


@dataclass(frozen=True)
class SchemaNode:
    """Узел шаблона схемы: имя, обязательные атрибуты, обязательные дети"""
    name: str
    required_attrs: Tuple[str, ...] = ()
    children: Tuple["SchemaNode", ...] = ()

    def __post_init__(self):
        names = [c.name for c in self.children]
        if len(set(names)) != len(names):
            raise ValueError(f"Повторяющиеся имена детей в шаблоне {self.name}")

    def check(self, element: XmlElement, path: str = "") -> None:
        here = f"{path}/{element.name}"
        if element.name != self.name:
            raise SchemaViolation(f"{here}: ожидался элемент {self.name}")
        for attr in self.required_attrs:
            if element.attr(attr) is None:
                raise SchemaViolation(f"{here}: нет обязательного атрибута @{attr}")
        for child_schema in self.children:
            candidates = element.children_named(child_schema.name)
            if not candidates:
                raise SchemaViolation(f"{here}: нет обязательного элемента {child_schema.name}")
            errors = []
            for candidate in candidates:
                try:
                    child_schema.check(candidate, here)
                    break
                except SchemaViolation as e:
                    errors.append(str(e))
            else:
                raise SchemaViolation(errors[0])


@dataclass(frozen=True)
class SchemaDescriptor:
    """Описание типа фасета (структурный аналог XSD)"""
    schema_id: str
    structure: Optional[SchemaNode] = None

    def __post_init__(self):
        if not self.schema_id:
            raise ValueError("schema_id не может быть пустым")

    def validate(self, root: XmlElement) -> None:
        if self.structure is not None:
            self.structure.check(root)


@dataclass(frozen=True)
class FacetXML:
    """Типизированный документ внутри фасета; единица сопоставления"""
    id: ElementId
    schema: SchemaDescriptor
    root: XmlElement

    def __post_init__(self):
        self.schema.validate(self.root)


def _escape_text(value: str) -> str:
    return escape(value, {"\r": "&#13;"})


def _escape_attr(value: str) -> str:
    return escape(value, {'"': "&quot;", "\n": "&#10;", "\r": "&#13;", "\t": "&#9;"})


def _write(element: XmlElement, out: List[str]) -> None:
    out.append("<" + element.name)
    for key, value in element.attrs:
        out.append(f' {key}="{_escape_attr(value)}"')
    if element.text is None and not element.children:
        out.append("/>")
        return
    out.append(">")
    if element.text is not None:
        out.append(_escape_text(element.text))
    for child in element.children:
        _write(child, out)
    out.append(f"</{element.name}>")


def canonicalize(doc: Union[FacetXML, XmlElement]) -> bytes:
    """
    Каноническая сериализация документа.

    Атрибуты в лексикографическом порядке ключей, дети в порядке хранения,
    без пробелов между элементами. Равные деревья дают одинаковые байты.
    """
    root = doc.root if isinstance(doc, FacetXML) else doc
    out: List[str] = []
    _write(root, out)
    return "".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# Подписи
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Signature:
    """Подпись: узел-подписант и дайджест фиксированной длины"""
    signer: NodeId
    digest: bytes


@dataclass(frozen=True)
class SigningKey:
    """Секрет узла"""
    node_id: NodeId
    secret: bytes = field(repr=False)


class SignatureScheme(ABC):
    """Подключаемая схема подписи"""

    digest_size: int = 0

    @abstractmethod
    def sign_bytes(self, secret: bytes, payload: bytes) -> bytes:
        pass

    @abstractmethod
    def verify_bytes(self, secret: bytes, payload: bytes, digest: bytes) -> bool:
        pass


class HmacSha256Scheme(SignatureScheme):
    """Ключевой MAC над каноническими байтами"""

    digest_size = 32

    def sign_bytes(self, secret: bytes, payload: bytes) -> bytes:
        return hmac.new(secret, payload, hashlib.sha256).digest()

    def verify_bytes(self, secret: bytes, payload: bytes, digest: bytes) -> bool:
        expected = self.sign_bytes(secret, payload)
        return hmac.compare_digest(expected, digest)


DEFAULT_SCHEME = HmacSha256Scheme()


class KeyRing:
    """
    Реестр ключей узлов прогона.

    Секреты выводятся детерминированно из seed прогона и id узла.
    """

    def __init__(self, seed: int = 0, scheme: Optional[SignatureScheme] = None):
        self.seed = seed
        self.scheme = scheme or DEFAULT_SCHEME
        self._keys: Dict[NodeId, SigningKey] = {}

    def register(self, node_id: NodeId) -> SigningKey:
        key = self._keys.get(node_id)
        if key is None:
            secret = hashlib.sha256(f"dire:{self.seed}:{node_id}".encode("utf-8")).digest()
            key = SigningKey(node_id=node_id, secret=secret)
            self._keys[node_id] = key
        return key

    def key_for(self, node_id: NodeId) -> Optional[SigningKey]:
        return self._keys.get(node_id)

    def __contains__(self, node_id: NodeId) -> bool:
        return node_id in self._keys

    def sign(self, key: SigningKey, doc: Union[FacetXML, XmlElement]) -> Signature:
        return Signature(signer=key.node_id, digest=self.scheme.sign_bytes(key.secret, canonicalize(doc)))

    def verify(self, signer: NodeId, doc: Union[FacetXML, XmlElement], sig: Signature) -> bool:
        """Неизвестный подписант или несовпадение id дают False, а не исключение"""
        if sig.signer != signer:
            return False
        key = self._keys.get(signer)
        if key is None:
            return False
        return self.scheme.verify_bytes(key.secret, canonicalize(doc), sig.digest)


def sign(key: SigningKey, doc: Union[FacetXML, XmlElement], scheme: Optional[SignatureScheme] = None) -> Signature:
    scheme = scheme or DEFAULT_SCHEME
    return Signature(signer=key.node_id, digest=scheme.sign_bytes(key.secret, canonicalize(doc)))


def verify(keyring: KeyRing, signer: NodeId, doc: Union[FacetXML, XmlElement], sig: Signature) -> bool:
    return keyring.verify(signer, doc, sig)


# ---------------------------------------------------------------------------
# Фасеты и сервисы
# ---------------------------------------------------------------------------

class FacetKind(Enum):
    """Вид фасета"""
    SPECIFICATION = "spec"
    ADDITIONAL_INFO = "addinfo"


@dataclass(frozen=True)
class Facet:
    """Фасет сервиса"""
    id: ElementId
    kind: FacetKind
    schema: SchemaDescriptor
    content: FacetXML
    author: NodeId
    signature: Signature
    service_ref: ElementId

    def __post_init__(self):
        if self.content.schema.schema_id != self.schema.schema_id:
            raise SchemaViolation(
                f"Фасет {self.id}: схема документа {self.content.schema.schema_id} "
                f"не совпадает со схемой фасета {self.schema.schema_id}"
            )

    @property
    def schema_id(self) -> str:
        return self.schema.schema_id

    @classmethod
    def create(
        cls,
        key: SigningKey,
        ids: IdGenerator,
        kind: FacetKind,
        schema: SchemaDescriptor,
        root: XmlElement,
        service_ref: ElementId,
        scheme: Optional[SignatureScheme] = None,
    ) -> "Facet":
        """Создать и подписать фасет ключом автора"""
        facet_id = ids.next_id()
        content = FacetXML(id=facet_id, schema=schema, root=root)
        return cls(
            id=facet_id,
            kind=kind,
            schema=schema,
            content=content,
            author=key.node_id,
            signature=sign(key, content, scheme),
            service_ref=service_ref,
        )


@dataclass(frozen=True)
class ServiceEntry:
    """Сервис с фасетами спецификации и дополнительными фасетами"""
    id: ElementId
    name: str
    creator: NodeId
    allow_add_info: bool = False
    spec_facets: Tuple[Facet, ...] = ()
    add_info_facets: Tuple[Facet, ...] = ()
    lease: Optional[LeaseState] = None

    def __post_init__(self):
        object.__setattr__(self, "spec_facets", tuple(self.spec_facets))
        object.__setattr__(self, "add_info_facets", tuple(self.add_info_facets))
        for facet in self.spec_facets:
            if facet.kind is not FacetKind.SPECIFICATION:
                raise ValueError(f"Фасет {facet.id} не является спецификацией")
            if facet.author != self.creator:
                raise SpecByNonCreator(f"Фасет {facet.id} подписан {facet.author}, а не {self.creator}")
            if facet.service_ref != self.id:
                raise ValueError(f"Фасет {facet.id} относится к {facet.service_ref}, а не к {self.id}")
        for facet in self.add_info_facets:
            if facet.kind is not FacetKind.ADDITIONAL_INFO:
                raise ValueError(f"Фасет {facet.id} не является дополнительным")
        if self.add_info_facets and not self.allow_add_info:
            raise AddInfoForbidden(f"Сервис {self.id} не разрешает дополнительные фасеты")
        ids = [f.id for f in self.facets]
        if len(set(ids)) != len(ids):
            raise DuplicateId(f"Повторяющиеся id фасетов у сервиса {self.id}")

    @property
    def facets(self) -> Tuple[Facet, ...]:
        return self.spec_facets + self.add_info_facets

    def spec_facets_of(self, schema_id: str) -> List[Facet]:
        return [f for f in self.spec_facets if f.schema_id == schema_id]

    def facet(self, facet_id: ElementId) -> Optional[Facet]:
        for f in self.facets:
            if f.id == facet_id:
                return f
        return None


def attach_facet(
    entry: ServiceEntry,
    facet: Facet,
    actor: NodeId,
    keyring: Optional[KeyRing] = None,
) -> ServiceEntry:
    """
    Прикрепить фасет к сервису

    Args:
        entry: Сервис
        facet: Новый фасет (facet.service_ref == entry.id)
        actor: Узел, выполняющий операцию
        keyring: Если задан, подпись фасета проверяется

    Returns:
        Новый ServiceEntry
    """
    if facet.service_ref != entry.id:
        raise ValueError(f"Фасет {facet.id} относится к {facet.service_ref}, а не к {entry.id}")
    if keyring is not None and not keyring.verify(facet.author, facet.content, facet.signature):
        raise InvalidSignature(f"Подпись фасета {facet.id} не прошла проверку")
    if facet.kind is FacetKind.SPECIFICATION:
        if actor != entry.creator or facet.author != entry.creator:
            raise SpecByNonCreator(f"{actor} не является создателем сервиса {entry.id}")
    elif not entry.allow_add_info:
        raise AddInfoForbidden(f"Сервис {entry.id} не разрешает дополнительные фасеты")
    if entry.facet(facet.id) is not None:
        raise DuplicateId(f"Фасет {facet.id} уже прикреплён к {entry.id}")

    if facet.kind is FacetKind.SPECIFICATION:
        return replace(entry, spec_facets=entry.spec_facets + (facet,))
    return replace(entry, add_info_facets=entry.add_info_facets + (facet,))


# ---------------------------------------------------------------------------
# Хранилище и двухшаговое обновление
# ---------------------------------------------------------------------------

Element = Union[ServiceEntry, Facet]


class ElementStore:
    """
    Хранилище элементов по ElementId.

    Удалённые id попадают в надгробия и не могут быть использованы повторно
    строгой вставкой (insert); upsert применяется для повторных поступлений
    по лизу.
    """

    def __init__(self):
        self._elements: Dict[ElementId, Element] = {}
        self._tombstones: Dict[ElementId, None] = {}
        self.log: List[Tuple[str, ElementId]] = []

    def __contains__(self, element_id: ElementId) -> bool:
        return element_id in self._elements

    def __len__(self) -> int:
        return len(self._elements)

    def get(self, element_id: ElementId) -> Element:
        try:
            return self._elements[element_id]
        except KeyError:
            raise UnknownElement(f"Элемент {element_id} не найден") from None

    def ids(self) -> List[ElementId]:
        return list(self._elements)

    def values(self) -> List[Element]:
        return list(self._elements.values())

    @property
    def tombstones(self) -> Tuple[ElementId, ...]:
        return tuple(self._tombstones)

    def insert(self, element: Element) -> None:
        if element.id in self._elements or element.id in self._tombstones:
            raise DuplicateId(f"Id {element.id} уже использован")
        self._elements[element.id] = element
        self.log.append(("insert", element.id))

    def upsert(self, element: Element) -> None:
        self._elements[element.id] = element
        self._tombstones.pop(element.id, None)
        self.log.append(("upsert", element.id))

    def remove(self, element_id: ElementId) -> Element:
        if element_id not in self._elements:
            raise UnknownElement(f"Элемент {element_id} не найден")
        element = self._elements.pop(element_id)
        self._tombstones[element_id] = None
        self.log.append(("delete", element_id))
        return element


def update_element(store: ElementStore, old_id: ElementId, new_element: Element) -> ElementStore:
    """
    Обновление в два шага: удаление старого элемента и создание нового

    Args:
        store: Хранилище
        old_id: Id заменяемого элемента
        new_element: Новый элемент со свежим id

    Returns:
        То же хранилище после обновления
    """
    if old_id not in store:
        raise UnknownElement(f"Элемент {old_id} не найден")
    if new_element.id == old_id or new_element.id in store or new_element.id in store.tombstones:
        raise DuplicateId(f"Новый элемент должен иметь свежий id, получен {new_element.id}")
    store.remove(old_id)
    store.insert(new_element)
    logger.debug(f"Элемент {old_id} заменён на {new_element.id}")
    return store
