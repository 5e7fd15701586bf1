"""
Core модули: модель сервисов, фасетные запросы, сообщения, ошибки
"""
from .errors import DireError, ConfigInvalid, IoFailure
from .facet_query import AddInfoInterest, ById, ByConstraints, SubConstraint, parse_path, eval_path
from .federation_info import FederationInfo, FederationStyle
from .lease import LeaseState
from .messages import AddInfoMessage, FederationPayload, ServiceMessage
from .service_model import ElementId, Facet, FacetKind, KeyRing, ServiceEntry, XmlElement

__all__ = [
    "DireError",
    "ConfigInvalid",
    "IoFailure",
    "AddInfoInterest",
    "ById",
    "ByConstraints",
    "SubConstraint",
    "parse_path",
    "eval_path",
    "FederationInfo",
    "FederationStyle",
    "LeaseState",
    "AddInfoMessage",
    "FederationPayload",
    "ServiceMessage",
    "ElementId",
    "Facet",
    "FacetKind",
    "KeyRing",
    "ServiceEntry",
    "XmlElement",
]
