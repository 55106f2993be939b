from __future__ import annotations

import hashlib
import re

import pytest

from hive import prompts

# sha256 of the template with placeholders blanked, runs of whitespace
# collapsed and blank lines dropped; frozen from an independent transcription
CONTENT_SHA256 = {
    prompts.USAGE_EXTRACTION: "a5eaaa955eb9214a12ccf7a4584654c5e891a9d48fdc94c3f0802c59ad0b2396",
    prompts.PARSING: "6f64938a4f575febf4259b8a6272e39e7826ce58d684874e2fd2891e50487a66",
    prompts.DOMAIN_CLASSIFICATION: "f2d7271c080e3194b991984463490b51c9b1c401734fcd03404d92fe7ddb481d",
    prompts.ACTION_SELECTION: "d9b7274a9eec45bedab8e39eb0ae0c1fb6272b01128eb88a788d678b3bd32aa2",
}

# exact bytes of the shipped files; canned provider replies are keyed on these
FILE_SHA256 = {
    prompts.USAGE_EXTRACTION: "32c941221a3a2d66c5dd94a8a2e578bcf25e40d04ee0323ce02dbf1082f4981d",
    prompts.PARSING: "fa0da5b16ea314dc2f7b46b4d6f52c580611bc20da336de1ddce89674990805f",
    prompts.DOMAIN_CLASSIFICATION: "c6bfa3304cc0afb1e59939a0dba0aa5dc040958c899165a8936e751bf7dea3ff",
    prompts.ACTION_SELECTION: "d4dd87dd62501a273de2a7bd49e7d92f979f48d1127bd9a923afd5244f6096a9",
}


def canonical(text: str) -> str:
    text = re.sub(r"\{[A-Za-z_]+\}", "{}", text)
    return "\n".join(" ".join(line.split()) for line in text.splitlines() if line.strip())


def content_checksum(name: str) -> str:
    return hashlib.sha256(canonical(prompts.template_text(name)).encode("utf-8")).hexdigest()


def file_checksum(name: str) -> str:
    return hashlib.sha256(prompts.template_text(name).encode("utf-8")).hexdigest()


@pytest.mark.parametrize("name", sorted(CONTENT_SHA256))
def test_template_content_checksum(name):
    assert content_checksum(name) == CONTENT_SHA256[name]


@pytest.mark.parametrize("name", sorted(FILE_SHA256))
def test_template_file_checksum(name):
    assert file_checksum(name) == FILE_SHA256[name]


@pytest.mark.parametrize("name, keys", sorted(prompts.PLACEHOLDERS.items()))
def test_placeholders_present(name, keys):
    text = prompts.template_text(name)
    for k in keys:
        assert text.count("{" + k + "}") == 1


def test_render_substitutes_literally():
    out = prompts.render(prompts.DOMAIN_CLASSIFICATION, domains='["audio"]', query="hi {there}")
    assert '["audio"]' in out
    assert "Provided Query: hi {there}. 'The order matters'" in out
    # literal JSON braces in the examples survive
    assert '{{"instruction"' in prompts.render(prompts.PARSING, USER_INPUT="q")


def test_render_rejects_wrong_placeholders():
    with pytest.raises(KeyError):
        prompts.render(prompts.PARSING, query="x")
    with pytest.raises(KeyError):
        prompts.template_text("nope")
