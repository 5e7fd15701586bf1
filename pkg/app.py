"""
DIRE Registry Simulator - симулятор федеративного реестра сервисов
Точка входа командной строки
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

# Добавляем путь к модулям
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import load_config
from core.errors import ConfigInvalid, IoFailure
from export.formatters import get_formatter
from export.report import emit_report, emit_table, load_report
from sim.oracles import CHI2_CRITICAL_DF7, action_chi_square, check_formulas
from sim.runner import compare_styles, run
from sim.workload import estimate_match_rate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Настройка логирования"""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def _load(path: str, seed: Optional[int] = None):
    config = load_config(path)
    if seed is not None:
        config.seed = seed
    return config


# =============================================================================
# Команды
# =============================================================================

def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args.config, args.seed)
    report = run(config)
    emit_report(report, args.out)
    print(get_formatter("text").format(report).content)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    models = report.tables.get("models")
    federations = report.tables.get("federations")
    if models is None or models.empty or federations is None:
        print("В отчёте нет федераций, отмеченных для проверки формул")
        return EXIT_OK
    result = check_formulas(federations, models)
    emit_table(result, args.report, "formulas")
    print(get_formatter("text").format_table(result, "Проверка формул").content)
    return EXIT_OK if result["passed"].all() else EXIT_CHECK_FAILED


def cmd_workload_stats(args: argparse.Namespace) -> int:
    config = _load(args.config, args.seed)
    stats = estimate_match_rate(config.workload, seed=config.seed, pairs=args.pairs)
    statistic, table = action_chi_square(config.workload, seed=config.seed, draws=args.draws)
    formatter = get_formatter("text")
    print(f"Вероятность совпадения интереса: {stats.match_rate:.4%} ({stats.matches}/{stats.pairs})")
    print(formatter.format_table(table, "Частоты действий").content)
    verdict = "принята" if statistic < CHI2_CRITICAL_DF7 else "отвергнута"
    print(f"χ² = {statistic:.2f} (критическое {CHI2_CRITICAL_DF7}, гипотеза {verdict})")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    config = _load(args.config, args.seed)
    table = compare_styles(config)
    emit_table(table, args.out, "comparison")
    print(get_formatter("text").format_table(table, "Сравнение стилей").content)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dire-sim",
        description="Симулятор федеративного реестра сервисов DIRE",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Подробный журнал (DEBUG)")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Только предупреждения")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Выполнить сценарий и записать отчёт")
    p_run.add_argument("--config", required=True, help="JSON-файл сценария")
    p_run.add_argument("--seed", type=int, default=None, help="Переопределить seed сценария")
    p_run.add_argument("--out", required=True, help="Каталог отчёта")
    p_run.set_defaults(handler=cmd_run)

    p_check = sub.add_parser("check", help="Сравнить трафик отчёта с аналитическими формулами")
    p_check.add_argument("--report", required=True, help="Каталог отчёта")
    p_check.set_defaults(handler=cmd_check)

    p_stats = sub.add_parser("workload-stats", help="Оценить вероятность совпадения и частоты действий")
    p_stats.add_argument("--config", required=True, help="JSON-файл сценария")
    p_stats.add_argument("--seed", type=int, default=None)
    p_stats.add_argument("--pairs", type=int, default=40000, help="Пар (сервис, интерес)")
    p_stats.add_argument("--draws", type=int, default=100000, help="Розыгрышей действий")
    p_stats.set_defaults(handler=cmd_workload_stats)

    p_cmp = sub.add_parser("compare", help="Прогнать федерации сценария во всех стилях")
    p_cmp.add_argument("--config", required=True, help="JSON-файл сценария")
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.add_argument("--out", required=True, help="Каталог для comparison.csv")
    p_cmp.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Главная функция"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except ConfigInvalid as e:
        logger.error(f"Некорректная конфигурация: {len(e.diagnostics)} ошибок")
        for path, message in e.diagnostics:
            print(f"{path}: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except IoFailure as e:
        logger.error(f"Ошибка ввода-вывода: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
