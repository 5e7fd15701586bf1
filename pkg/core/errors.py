"""
Иерархия исключений DIRE
"""
from typing import List, Tuple


class DireError(Exception):
    """Базовое исключение симулятора"""


# Модель сервисов

class SchemaViolation(DireError):
    """Документ фасета не соответствует структуре схемы"""


class SpecByNonCreator(DireError):
    """Фасет спецификации прикрепляет не создатель сервиса"""


class AddInfoForbidden(DireError):
    """Сервис не разрешает дополнительные фасеты (allow_add_info=false)"""


class DuplicateId(DireError):
    """Идентификатор элемента уже использован"""


class UnknownElement(DireError, KeyError):
    """Элемент с таким идентификатором отсутствует"""

    def __str__(self) -> str:
        return Exception.__str__(self)


class InvalidSignature(DireError):
    """Подпись фасета не проходит проверку"""


# Язык запросов

class QueryError(DireError, ValueError):
    """Ошибка разбора выражения пути"""


class UnsupportedSyntax(QueryError):
    """Конструкция вне поддерживаемого подмножества"""


class EmptyExpression(QueryError):
    """Пустое выражение"""


# Диспетчер

class DispatcherError(DireError):
    """Ошибка слоя publish/subscribe"""


class DetachedClient(DispatcherError):
    """Клиент не подключён ни к одному брокеру"""


class ReplyTimeout(DispatcherError):
    """Не все ожидаемые ответы получены до истечения таймаута"""

    def __init__(self, message: str, received: int = 0, expected: int = 0):
        super().__init__(message)
        self.received = received
        self.expected = expected


class DisconnectedTopology(DispatcherError):
    """Оверлей брокеров несвязен"""


class CycleDetected(DispatcherError):
    """Оверлей брокеров содержит цикл"""


# Delivery manager

class NotCreator(DireError):
    """Публиковать сервис может только его создатель"""


class UnknownService(DireError):
    """Сервис отсутствует в локальном реестре"""


class UnknownFacet(DireError):
    """Фасет отсутствует в локальном реестре"""


class NotAMember(DireError):
    """Узел не состоит в федерации"""


class AlreadyJoined(DireError):
    """Узел уже состоит в федерации"""


class UnknownFederation(DireError):
    """Федерация неизвестна"""


# Каталог федераций

class NotManager(DireError):
    """Операция доступна только менеджеру федерации"""


class DuplicateFederation(DireError):
    """Федерация с таким идентификатором уже зарегистрирована"""


class NoDirectoryAvailable(DireError):
    """Ни один каталог не ответил на запрос обнаружения"""


# Стили федераций

class DeadContact(DireError):
    """Ни один из известных контактов не отвечает"""


# Конфигурация и вывод

class ConfigInvalid(DireError, ValueError):
    """Ошибки конфигурации с указанием полей"""

    def __init__(self, diagnostics: List[Tuple[str, str]]):
        self.diagnostics = list(diagnostics)
        lines = [f"{path}: {message}" for path, message in self.diagnostics]
        super().__init__("Некорректная конфигурация:\n  " + "\n  ".join(lines))


class IoFailure(DireError, OSError):
    """Ошибка записи/чтения отчёта"""
