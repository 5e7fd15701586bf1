"""
Каталог встроенных схем фасетов и построители документов
"""
from typing import Dict, Iterable, Optional, Sequence

from core.service_model import SchemaDescriptor, SchemaNode, XmlElement

WSDL = SchemaDescriptor(
    "WSDL",
    SchemaNode(
        "definitions",
        required_attrs=("name",),
        children=(SchemaNode("portType", required_attrs=("name",)),),
    ),
)

QOS = SchemaDescriptor(
    "QoS",
    SchemaNode(
        "QoS",
        children=(
            SchemaNode(
                "response",
                children=(SchemaNode("case"), SchemaNode("time", required_attrs=("format",))),
            ),
        ),
    ),
)

SOAP_TEST = SchemaDescriptor("SoapTest", SchemaNode("SoapTest", children=(SchemaNode("completeness"),)))

PRICING = SchemaDescriptor(
    "Pricing", SchemaNode("Pricing", children=(SchemaNode("plan", required_attrs=("name",)),))
)

SLA = SchemaDescriptor("SLA", SchemaNode("SLA", required_attrs=("provider",)))

DESCRIPTION = SchemaDescriptor("Description", SchemaNode("Description"))


class SchemaCatalog:
    """Известные узлу схемы; неизвестный id даёт схему без структуры"""

    def __init__(self, schemas: Iterable[SchemaDescriptor] = ()):
        self._schemas: Dict[str, SchemaDescriptor] = {}
        for schema in schemas:
            self.add(schema)

    def add(self, schema: SchemaDescriptor) -> None:
        self._schemas[schema.schema_id] = schema

    def get(self, schema_id: str) -> SchemaDescriptor:
        schema = self._schemas.get(schema_id)
        if schema is None:
            schema = SchemaDescriptor(schema_id)
            self._schemas[schema_id] = schema
        return schema

    def __contains__(self, schema_id: str) -> bool:
        return schema_id in self._schemas

    def ids(self):
        return list(self._schemas)


DEFAULT_CATALOG = SchemaCatalog([WSDL, QOS, SOAP_TEST, PRICING, SLA, DESCRIPTION])


def build_wsdl(service_name: str, operations: Sequence[str], port_type: Optional[str] = None) -> XmlElement:
    """WSDL-описание с одной portType и перечисленными операциями"""
    ops = [
        XmlElement.build(
            "operation",
            {"name": op},
            children=[
                XmlElement.build("input", {"message": f"{op}Request"}),
                XmlElement.build("output", {"message": f"{op}Response"}),
            ],
        )
        for op in operations
    ]
    port = XmlElement.build("portType", {"name": port_type or f"{service_name}PortType"}, children=ops)
    return XmlElement.build("definitions", {"name": service_name}, children=[port])


def build_qos(worst_ms: int, best_ms: Optional[int] = None, time_format: str = "ms") -> XmlElement:
    """QoS-документ с временем отклика в худшем и (опционально) лучшем случае"""
    responses = []
    if best_ms is not None:
        responses.append(_response("best", best_ms, time_format))
    responses.append(_response("worst", worst_ms, time_format))
    return XmlElement.build("QoS", children=responses)


def _response(case: str, value: int, time_format: str) -> XmlElement:
    return XmlElement.build(
        "response",
        children=[
            XmlElement.build("case", text=case),
            XmlElement.build("time", {"format": time_format}, text=str(value)),
        ],
    )


def build_soap_test(testcases: int, completeness: float) -> XmlElement:
    """Отчёт о тестах: testcase-элементы и коэффициент полноты в [0, 1]"""
    children = [XmlElement.build("completeness", text=f"{completeness:.2f}")]
    children.extend(
        XmlElement.build("testcase", {"id": f"t{i}", "outcome": "pass"}) for i in range(testcases)
    )
    return XmlElement.build("SoapTest", children=children)


def build_pricing(plan: str, price: int, currency: str = "EUR") -> XmlElement:
    return XmlElement.build(
        "Pricing",
        children=[
            XmlElement.build(
                "plan",
                {"name": plan},
                children=[XmlElement.build("price", {"currency": currency}, text=str(price))],
            )
        ],
    )


def build_sla(provider: str, availability: float) -> XmlElement:
    return XmlElement.build(
        "SLA",
        {"provider": provider},
        children=[XmlElement.build("availability", text=f"{availability:.3f}")],
    )


def build_description(text: str, tags: Sequence[str] = ()) -> XmlElement:
    return XmlElement.build(
        "Description",
        children=[XmlElement.build("summary", text=text)]
        + [XmlElement.build("tag", text=t) for t in tags],
    )
