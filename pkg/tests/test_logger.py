import logging

from rich.text import Text

from shadowbag.common.logger import ShadowHighlighter, set_debug_mode, setup_logger


def _styled(message: str) -> dict[str, list[str]]:
    text = Text(message)
    ShadowHighlighter().highlight(text)
    found: dict[str, list[str]] = {}
    for span in text.spans:
        found.setdefault(str(span.style), []).append(message[span.start:span.end])
    return found


class TestHighlighter:

    def test_phase_tag_and_quantities(self):
        styled = _styled("[Main] epoch 3: E/L=-0.41250 lambda_min=2.5e-03 lr=0.01")
        assert styled["shadow.phase"] == ["Main"]
        assert styled["shadow.metric"] == ["E/L", "lambda_min", "lr"]
        assert styled["shadow.value"] == ["-0.41250", "2.5e-03", "0.01"]

    def test_oracle_tag(self):
        styled = _styled("[Oracle] main L=8: E0=-3.21 (E0/L=-0.40)")
        assert styled["shadow.oracle"] == ["Oracle"]
        assert "E0" in styled["shadow.metric"]

    def test_undefined_factor(self):
        styled = _styled("[Run] Done: f=None")
        assert styled["shadow.value"] == ["None"]

    def test_plain_message_is_untouched(self):
        assert _styled("nothing to see") == {}


class TestDebugMode:

    def test_toggles_registered_loggers(self):
        logger = setup_logger("Highlight")
        try:
            set_debug_mode(True)
            assert logger.level == logging.DEBUG
        finally:
            set_debug_mode(False)
        assert logger.level == logging.INFO

    def test_single_handler(self):
        assert setup_logger("Highlight").handlers == setup_logger("Highlight").handlers
        assert len(setup_logger("Highlight").handlers) == 1
