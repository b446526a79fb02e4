import logging
from rich.console import Console
from rich.highlighter import RegexHighlighter
from rich.logging import RichHandler
from rich.theme import Theme

custom_theme = Theme({
    "info": "bold #FFFFFF on #61AD00",
    "warning": "bold #FFFFFF on #DB6900",
    "error": "bold #FFFFFF on #d70000",
    "critical": "bold #FFFFFF on red",
    "logging.level.debug": "cyan",
    "logging.level.info": "bold #FFFFFF on #61AD00",
    "logging.level.warning": "bold #FFFFFF on #DB6900",
    "logging.level.error": "bold #FFFFFF on #d70000",
    "logging.level.critical": "bold #FFFFFF on red",
    "log.time": "#A3A3A3",
    "shadow.phase": "bold #B48EFF",
    "shadow.oracle": "bold #5FD7FF",
    "shadow.tag": "bold #A3A3A3",
    "shadow.metric": "#87AFD7",
    "shadow.value": "bold #FFFFFF",
})

# Logs and progress bars go to stderr; stdout stays free for CSV/JSON piping.
console = Console(theme=custom_theme, stderr=True)

_loggers: list[logging.Logger] = []


class ShadowHighlighter(RegexHighlighter):
    """Colours the leading [Component] tag and key=value run quantities."""
    base_style = "shadow."
    highlights = [
        r"^\[(?P<phase>Preopt|Main|Run|Sweep)\]",
        r"^\[(?P<oracle>Oracle|Floor)\]",
        r"^\[(?P<tag>[A-Za-z]+)\]",
        r"(?P<metric>E/L|E0/L|E0|lambda_min|x_eps|eps0|eps|mu|lr|f|alpha0|b0)=(?P<value>[-+]?[0-9.]+(?:e[-+]?[0-9]+)?|None)",
    ]


class CustomRichHandler(RichHandler):
    def render_message(self, record, message):
        text = super().render_message(record, message)
        if record.levelno >= logging.ERROR:
            text.style = "#FF7878"
        elif record.levelno >= logging.WARNING:
            text.style = "#FFD078"
        return text


def setup_logger(name: str = "shadowbag") -> logging.Logger:
    logger = logging.getLogger(name)

    if not logger.handlers:
        handler = CustomRichHandler(
            console=console,
            highlighter=ShadowHighlighter(),
            rich_tracebacks=True,
            show_time=True,
            omit_repeated_times=False,
            show_path=False,
            markup=True,
            enable_link_path=False,
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)

    logger.propagate = False

    if logger not in _loggers:
        _loggers.append(logger)

    return logger


def set_debug_mode(enabled: bool):
    """Toggle DEBUG level for all registered loggers."""
    level = logging.DEBUG if enabled else logging.INFO
    for logger in _loggers:
        logger.setLevel(level)
