import pytest

from cminer.corpus import Document


@pytest.fixture
def fund_corpus():
    """Small mixed corpus used across frequency/co-occurrence tests."""
    return [
        Document(id="d1", body="fund fund"),
        Document(id="d2", body="fund climate"),
    ]


def make_docs(bodies, **extra):
    return [Document(id=f"{i:06d}", body=b, **extra)
            for i, b in enumerate(bodies)]
