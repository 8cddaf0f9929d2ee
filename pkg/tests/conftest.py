import io
import json

import pytest

from footprint.synth import SynthKind, SynthProfile, generate_document, reference_corpus


@pytest.fixture(scope="session")
def wannacry_doc():
    return generate_document(SynthProfile(SynthKind.WANNACRY, 0))


@pytest.fixture(scope="session")
def corpus5():
    """One WannaCry document plus the four default ambient documents."""
    return reference_corpus(4)


def make_report(enhanced=(), processes=(), **extra):
    body = {"behavior": {"processes": list(processes), "enhanced": list(enhanced)}}
    body.update(extra)
    return io.BytesIO(json.dumps(body).encode())
