"""
Проводной формат фасета: фиксированный заголовок + каноническая форма документа

Формат (big-endian):
    магия "DF", версия (1 байт),
    строки с префиксом длины u16: id, kind, schema_id, author, signer, service_ref,
    дайджест с префиксом u16, канонический документ с префиксом u32.
"""
import struct
import xml.etree.ElementTree as ET
from typing import List, Tuple

from core.schemas import DEFAULT_CATALOG, SchemaCatalog
from core.service_model import (
    ElementId,
    Facet,
    FacetKind,
    FacetXML,
    Signature,
    XmlElement,
    canonicalize,
)

MAGIC = b"DF"
VERSION = 1


def _pack_str(value: str) -> bytes:
    data = value.encode("utf-8")
    return struct.pack(">H", len(data)) + data


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("Обрезанное сообщение")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return struct.unpack(">B", self.take(1))[0]

    def blob16(self) -> bytes:
        (n,) = struct.unpack(">H", self.take(2))
        return self.take(n)

    def blob32(self) -> bytes:
        (n,) = struct.unpack(">I", self.take(4))
        return self.take(n)

    def text(self) -> str:
        return self.blob16().decode("utf-8")


def encode_facet(facet: Facet) -> bytes:
    """Закодировать фасет для передачи"""
    body = canonicalize(facet.content)
    return b"".join(
        [
            MAGIC,
            struct.pack(">B", VERSION),
            _pack_str(facet.id.value),
            _pack_str(facet.kind.value),
            _pack_str(facet.schema_id),
            _pack_str(facet.author),
            _pack_str(facet.signature.signer),
            _pack_str(facet.service_ref.value),
            struct.pack(">H", len(facet.signature.digest)),
            facet.signature.digest,
            struct.pack(">I", len(body)),
            body,
        ]
    )


def read_header(data: bytes) -> Tuple[ElementId, FacetKind, str, str, ElementId]:
    """Заголовок без разбора документа: id, kind, schema_id, author, service_ref"""
    reader = _Reader(data)
    _check_magic(reader)
    facet_id = ElementId(reader.text())
    kind = FacetKind(reader.text())
    schema_id = reader.text()
    author = reader.text()
    reader.text()
    service_ref = ElementId(reader.text())
    return facet_id, kind, schema_id, author, service_ref


def decode_facet(data: bytes, catalog: SchemaCatalog = DEFAULT_CATALOG) -> Facet:
    """
    Декодировать фасет

    Args:
        data: Байты в проводном формате
        catalog: Каталог схем для восстановления SchemaDescriptor

    Returns:
        Facet (документ проверяется по структуре схемы)
    """
    reader = _Reader(data)
    _check_magic(reader)
    facet_id = ElementId(reader.text())
    kind = FacetKind(reader.text())
    schema = catalog.get(reader.text())
    author = reader.text()
    signer = reader.text()
    service_ref = ElementId(reader.text())
    digest = reader.blob16()
    root = parse_canonical(reader.blob32())
    if reader.pos != len(data):
        raise ValueError("Лишние байты после фасета")
    return Facet(
        id=facet_id,
        kind=kind,
        schema=schema,
        content=FacetXML(id=facet_id, schema=schema, root=root),
        author=author,
        signature=Signature(signer=signer, digest=digest),
        service_ref=service_ref,
    )


def _check_magic(reader: _Reader) -> None:
    if reader.take(2) != MAGIC:
        raise ValueError("Неизвестный формат фасета")
    version = reader.u8()
    if version != VERSION:
        raise ValueError(f"Неподдерживаемая версия формата: {version}")


def parse_canonical(data: bytes) -> XmlElement:
    """Разобрать каноническую форму обратно в дерево"""
    try:
        element = ET.fromstring(data)
    except ET.ParseError as e:
        raise ValueError(f"Некорректный документ: {e}") from None
    return _convert(element)


def _convert(element: ET.Element) -> XmlElement:
    children: List[XmlElement] = [_convert(child) for child in element]
    return XmlElement(
        name=element.tag,
        attrs=tuple(element.attrib.items()),
        children=tuple(children),
        text=element.text,
    )
