import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def write_spec(tmp_path):
    """Write a TOML plot spec and return its path."""

    def _write(kind, inputs, out_name="fig.png", axes=None, output=None,
               name="spec.toml", omit_kind=False):
        lines = [] if omit_kind else [f'kind = {json.dumps(kind)}']
        lines.append("[inputs]")
        for k, v in inputs.items():
            lines.append(f"{k} = {json.dumps(str(v))}")
        if axes:
            lines.append("[axes]")
            for k, v in axes.items():
                lines.append(f"{k} = {json.dumps(v)}")
        lines.append("[output]")
        lines.append(f"path = {json.dumps(str(tmp_path / out_name))}")
        if output:
            for k, v in output.items():
                lines.append(f"{k} = {json.dumps(v)}")
        p = tmp_path / name
        p.write_text("\n".join(lines) + "\n")
        return p

    return _write
