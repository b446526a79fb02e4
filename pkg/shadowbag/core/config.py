import json
from pathlib import Path

from shadowbag.schemas.config import Settings

PACKAGE_PATH = Path(__file__).parent.parent
SETTINGS_PATH = PACKAGE_PATH / "settings.json"


def load_settings(path: Path = SETTINGS_PATH) -> Settings:
    """Settings from JSON; defaults fill in anything absent, including the file itself."""
    data = {}
    if path.exists():
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    return Settings.model_validate(data)


settings = load_settings()
