"""
Тесты модели сервисов: идентификаторы, схемы, подписи, фасеты, хранилище

Запуск:
    pytest tests/test_service_model.py
"""
import sys
import os
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.errors import (
    AddInfoForbidden,
    DuplicateId,
    InvalidSignature,
    SchemaViolation,
    SpecByNonCreator,
    UnknownElement,
)
from core.lease import LeaseState
from core.schemas import QOS, SOAP_TEST, WSDL, build_qos, build_soap_test, build_wsdl
from core.service_model import (
    ElementId,
    ElementStore,
    Facet,
    FacetKind,
    FacetXML,
    IdGenerator,
    XmlElement,
    attach_facet,
    canonicalize,
    update_element,
)
from core.wire import decode_facet, encode_facet, read_header


class TestElementId:
    """Идентификаторы элементов"""

    def test_parts(self):
        """Узел и счётчик извлекаются из строки"""
        element_id = ElementId("bank_a:17")
        assert element_id.node == "bank_a"
        assert element_id.counter == 17
        assert str(element_id) == "bank_a:17"

    def test_node_with_colon(self):
        """Счётчик берётся после последнего двоеточия"""
        assert ElementId("x:y:3").node == "x:y"

    def test_invalid(self):
        """Без счётчика id некорректен"""
        with pytest.raises(ValueError):
            ElementId("bank_a")
        with pytest.raises(ValueError):
            ElementId("bank_a:x")

    def test_generator_monotonic(self):
        """Генератор выдаёт возрастающие id своего узла"""
        ids = IdGenerator("n1")
        first, second = ids.next_id(), ids.next_id()
        assert first == ElementId("n1:1")
        assert second.counter == first.counter + 1


class TestXmlAndSchema:
    """Документы и проверка схем"""

    def test_attribute_order_irrelevant(self):
        """Порядок атрибутов не влияет на равенство и каноническую форму"""
        a = XmlElement("op", attrs=(("name", "f"), ("kind", "rpc")))
        b = XmlElement("op", attrs=(("kind", "rpc"), ("name", "f")))
        assert a == b
        assert canonicalize(a) == canonicalize(b)

    def test_canonical_form(self):
        """Каноническая форма без пробелов, атрибуты по алфавиту"""
        doc = XmlElement.build("a", {"z": "1", "b": "2"}, children=[XmlElement.build("c", text="x<y")])
        assert canonicalize(doc) == b'<a b="2" z="1"><c>x&lt;y</c></a>'

    def test_duplicate_attrs_rejected(self):
        with pytest.raises(ValueError):
            XmlElement("a", attrs=(("x", "1"), ("x", "2")))

    def test_valid_wsdl(self):
        """Построенный WSDL проходит проверку схемы"""
        doc = FacetXML(ElementId("a:1"), WSDL, build_wsdl("quotes", ["getLastTrade"]))
        assert doc.root.attr("name") == "quotes"

    def test_missing_child_rejected(self):
        """Документ без обязательного элемента не создаётся"""
        root = XmlElement.build("definitions", {"name": "quotes"})
        with pytest.raises(SchemaViolation):
            FacetXML(ElementId("a:1"), WSDL, root)

    def test_missing_attribute_rejected(self):
        root = XmlElement.build(
            "QoS", children=[XmlElement.build("response", children=[
                XmlElement.build("case", text="worst"), XmlElement.build("time", text="10"),
            ])]
        )
        with pytest.raises(SchemaViolation):
            FacetXML(ElementId("a:1"), QOS, root)


def random_shape(rng, depth=0):
    """(имя, атрибуты, текст, дети) случайного дерева"""
    keys = rng.choice(8, size=int(rng.integers(0, 5)), replace=False)
    attrs = [(f"k{key}", f"v{rng.integers(100)}&\"<") for key in keys]
    text = f"t{rng.integers(1000)} <&>" if rng.random() < 0.5 else None
    children = [random_shape(rng, depth + 1) for _ in range(int(rng.integers(0, 4)))] if depth < 3 else []
    return f"n{rng.integers(5)}", attrs, text, children


def realize(shape, rng):
    """Дерево по форме с атрибутами в случайном порядке"""
    name, attrs, text, children = shape
    order = rng.permutation(len(attrs))
    return XmlElement(
        name, attrs=tuple(attrs[i] for i in order), children=tuple(realize(c, rng) for c in children), text=text,
    )


def same_shape(parsed, shape):
    name, attrs, text, children = shape
    return (
        parsed.tag == name
        and parsed.attrib == dict(attrs)
        and parsed.text == text
        and len(parsed) == len(children)
        and all(parsed_child.tail is None for parsed_child in parsed)
        and all(same_shape(p, c) for p, c in zip(parsed, children))
    )


class TestCanonicalTrees:
    """Каноническая форма случайных деревьев"""

    @pytest.mark.parametrize("seed", range(5))
    def test_attribute_permutations(self, seed):
        """Перестановка атрибутов не меняет ни равенство, ни байты"""
        rng = np.random.default_rng(seed)
        for _ in range(50):
            shape = random_shape(rng)
            first, second = realize(shape, rng), realize(shape, rng)
            assert first == second
            assert canonicalize(first) == canonicalize(second)

    @pytest.mark.parametrize("seed", range(3))
    def test_canonical_bytes_describe_tree(self, seed):
        """Каноническая форма - корректный XML того же дерева, атрибуты по алфавиту"""
        rng = np.random.default_rng(seed)
        for _ in range(50):
            shape = random_shape(rng)
            data = canonicalize(realize(shape, rng))
            assert same_shape(ET.fromstring(data), shape)
            assert b"> <" not in data and b"\n" not in data

    def test_value_change_changes_bytes(self):
        rng = np.random.default_rng(11)
        name, attrs, text, children = random_shape(rng)
        changed = (name, attrs + [("zz", "1")], text, children)
        assert canonicalize(realize((name, attrs, text, children), rng)) != canonicalize(realize(changed, rng))


class TestSignatures:
    """Подписи фасетов"""

    def test_sign_and_verify(self, keyring):
        """Подпись автора проверяется"""
        key = keyring.key_for("a")
        doc = build_wsdl("quotes", ["getLastTrade"])
        sig = keyring.sign(key, doc)
        assert sig.signer == "a"
        assert keyring.verify("a", doc, sig)

    def test_tampered_document(self, keyring):
        """Изменённый документ не проходит проверку"""
        sig = keyring.sign(keyring.key_for("a"), build_wsdl("quotes", ["getLastTrade"]))
        assert not keyring.verify("a", build_wsdl("quotes", ["getQuote"]), sig)

    def test_signer_mismatch(self, keyring):
        """Подпись другого узла не засчитывается за автора"""
        doc = build_wsdl("quotes", ["getLastTrade"])
        sig = keyring.sign(keyring.key_for("m"), doc)
        assert not keyring.verify("a", doc, sig)

    def test_unknown_signer(self, keyring):
        doc = build_wsdl("quotes", ["getLastTrade"])
        sig = keyring.sign(keyring.key_for("a"), doc)
        assert not keyring.verify("zzz", doc, replace(sig, signer="zzz"))

    def test_deterministic_keys(self, keyring):
        """Ключи зависят только от seed и id узла"""
        from core.service_model import KeyRing
        other = KeyRing(seed=42)
        assert other.register("a").secret == keyring.key_for("a").secret
        assert KeyRing(seed=43).register("a").secret != keyring.key_for("a").secret


class TestServiceEntry:
    """Инварианты сервиса и прикрепление фасетов"""

    def test_factory(self, make_service):
        """Фабрика даёт WSDL и QoS фасеты создателя"""
        entry = make_service()
        assert [f.schema_id for f in entry.spec_facets] == ["WSDL", "QoS"]
        assert all(f.author == "a" for f in entry.spec_facets)

    def test_spec_by_non_creator(self, keyring, make_service):
        """Фасет спецификации может добавить только создатель"""
        entry = make_service()
        facet = Facet.create(
            keyring.key_for("m"), IdGenerator("m"), FacetKind.SPECIFICATION, QOS, build_qos(5), entry.id
        )
        with pytest.raises(SpecByNonCreator):
            attach_facet(entry, facet, "m")
        with pytest.raises(SpecByNonCreator):
            replace(entry, spec_facets=entry.spec_facets + (facet,))

    def test_add_info_allowed(self, keyring, make_service):
        """Чужой дополнительный фасет принимается при allow_add_info"""
        entry = make_service()
        facet = Facet.create(
            keyring.key_for("b"), IdGenerator("b"), FacetKind.ADDITIONAL_INFO, SOAP_TEST,
            build_soap_test(11, 0.9), entry.id,
        )
        updated = attach_facet(entry, facet, "b", keyring)
        assert updated.add_info_facets == (facet,)
        assert entry.add_info_facets == ()

    def test_add_info_forbidden(self, keyring, make_service):
        entry = make_service(allow_add_info=False)
        facet = Facet.create(
            keyring.key_for("b"), IdGenerator("b"), FacetKind.ADDITIONAL_INFO, SOAP_TEST,
            build_soap_test(3, 0.5), entry.id,
        )
        with pytest.raises(AddInfoForbidden):
            attach_facet(entry, facet, "b")

    def test_invalid_signature(self, keyring, make_service):
        """Подпись чужим ключом при заявленном авторе отвергается"""
        entry = make_service()
        facet = Facet.create(
            keyring.key_for("m"), IdGenerator("b"), FacetKind.ADDITIONAL_INFO, SOAP_TEST,
            build_soap_test(3, 0.5), entry.id,
        )
        forged = replace(facet, author="b")
        with pytest.raises(InvalidSignature):
            attach_facet(entry, forged, "b", keyring)

    def test_duplicate_facet(self, keyring, make_service):
        entry = make_service()
        with pytest.raises(DuplicateId):
            attach_facet(entry, entry.spec_facets[0], "a")


class TestElementStore:
    """Хранилище элементов и двухшаговое обновление"""

    def test_insert_get_remove(self, make_service):
        store = ElementStore()
        entry = make_service()
        store.insert(entry)
        assert store.get(entry.id) is entry
        store.remove(entry.id)
        assert entry.id not in store
        with pytest.raises(UnknownElement):
            store.get(entry.id)

    def test_tombstone_blocks_reuse(self, make_service):
        """Удалённый id нельзя вставить повторно"""
        store = ElementStore()
        entry = make_service()
        store.insert(entry)
        store.remove(entry.id)
        with pytest.raises(DuplicateId):
            store.insert(entry)

    def test_update_is_delete_plus_create(self, make_service):
        """Обновление: удаление старого и вставка нового с новым id"""
        store = ElementStore()
        old = make_service()
        store.insert(old)
        new = make_service(qos_ms=60)
        update_element(store, old.id, new)
        assert old.id not in store
        assert new.id in store
        assert store.log[-2:] == [("delete", old.id), ("insert", new.id)]

    def test_update_requires_fresh_id(self, make_service):
        store = ElementStore()
        old = make_service()
        store.insert(old)
        with pytest.raises(DuplicateId):
            update_element(store, old.id, replace(old, name="renamed"))

    def test_update_unknown(self, make_service):
        with pytest.raises(UnknownElement):
            update_element(ElementStore(), ElementId("a:99"), make_service())

    @pytest.mark.parametrize("seed", range(3))
    def test_random_updates_grow_ids(self, make_service, seed):
        """Случайные обновления: id узла растут, удалённые id не возвращаются"""
        rng = np.random.default_rng(seed)
        store = ElementStore()
        creators = ("a", "b", "c")
        for creator in creators:
            store.insert(make_service(creator=creator))
        retired = set()
        for _ in range(60):
            old_id = store.ids()[int(rng.integers(len(store)))]
            creator = creators[int(rng.integers(len(creators)))]
            newest = max((i.counter for i in store.ids() + list(store.tombstones) if i.node == creator), default=0)
            new = make_service(creator=creator, qos_ms=int(rng.integers(10, 200)))
            update_element(store, old_id, new)
            retired.add(old_id)
            assert new.id.counter > newest
            assert len(store) == len(creators)
            assert not retired & set(store.ids())
            assert retired <= set(store.tombstones)
            with pytest.raises(DuplicateId):
                store.insert(replace(new, id=old_id, spec_facets=()))


class TestLease:
    """Лиз-контракты"""

    def test_expiry_strict(self):
        """Лиз истекает строго после issued_at + duration"""
        lease = LeaseState(issued_at=10.0, duration=100.0, renew_period=50.0)
        assert not lease.expired(110.0)
        assert lease.expired(110.5)

    def test_renewed(self):
        lease = LeaseState(0.0, 100.0, 50.0).renewed(60.0)
        assert lease.expires_at == 160.0

    def test_invalid_contract(self):
        with pytest.raises(ValueError):
            LeaseState(0.0, 10.0, 20.0)
        with pytest.raises(ValueError):
            LeaseState(0.0, 0.0, 0.0)


class TestWire:
    """Проводной формат фасета"""

    def test_header_without_parsing(self, make_service):
        """Заголовок читается без разбора документа"""
        facet = make_service().spec_facets[1]
        facet_id, kind, schema_id, author, service_ref = read_header(encode_facet(facet))
        assert (facet_id, kind, schema_id, author) == (facet.id, FacetKind.SPECIFICATION, "QoS", "a")
        assert service_ref == facet.service_ref

    def test_decoded_signature_still_valid(self, keyring, make_service):
        """Подпись декодированного фасета проходит проверку"""
        facet = make_service().spec_facets[0]
        decoded = decode_facet(encode_facet(facet))
        assert decoded == facet
        assert keyring.verify(decoded.author, decoded.content, decoded.signature)

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            decode_facet(b"not a facet")
