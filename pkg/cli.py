import logging
import sys

from blueprint_optimizer.orchestrator import RunConfig, optimize
from blueprint_optimizer.parser.instance import parse_instance
from blueprint_optimizer.render import RenderStyle, render_ascii
from blueprint_optimizer.utils.formatter import configure_logging

configure_logging(verbose=True)

_LOGGER = logging.getLogger(__name__)


def main(path: str) -> int:
    with open(path, encoding="utf-8") as handle:
        inst = parse_instance(handle.read())

    report = optimize(inst, RunConfig(max_stage1_attempts=8, dump_dir=None))

    for attempt in report.attempts:
        _LOGGER.info("%s", attempt)

    if report.blueprint is None:
        _LOGGER.warning("No blueprint: %s", report.message)
        return 1

    print(render_ascii(report.blueprint, RenderStyle(legend=True)))
    return 0


if len(sys.argv) != 2:
    _LOGGER.error("Usage: python cli.py <instance.json>")
    sys.exit(3)

sys.exit(main(sys.argv[1]))
