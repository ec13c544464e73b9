"""Diary answer vocabularies and the default place/person schemas.

The diary uses fixed answer sets: 17 places, 23 activities, 9 companion
kinds, and a 1-5 mood scale. Mapping tables route answers to etypes and
relation predicates; place classes route to etypes on the reference side.
All of these are configuration, not hard-wired logic.
"""

from __future__ import annotations

from .teleontology import Etype, SelectionSpec, Teleontology, default_stlo, etg_from_ktlo, ktlo_from_stlo


class VocabError(ValueError):
    """Answer value outside the configured vocabulary."""


WHERE_ANSWERS = (
    "Home",
    "Relatives Home",
    "House (friends, others)",
    "Classroom / Study hall",
    "Classroom / Laboratory",
    "University Library",
    "Other university place",
    "Canteen",
    "Gym",
    "Workplace",
    "Shop, supermarket",
    "Pizzeria, pub, bar",
    "Restaurant",
    "Bank, post office",
    "Movie, theater, concert",
    "Church",
    "Other place",
)

WHAT_ANSWERS = (
    "Sleeping",
    "Eating",
    "Studying",
    "Lesson",
    "Work",
    "Social life",
    "Sport",
    "Shopping",
    "Coffee break",
    "Travelling",
    "Walking",
    "Reading",
    "TV, video",
    "Internet, social media",
    "Gaming",
    "Cooking",
    "Housework",
    "Personal care",
    "Music",
    "Phone call",
    "Voluntary work",
    "Hobbies",
    "Other",
)

WITHWHOM_ANSWERS = (
    "Alone",
    "Friend(s)",
    "Classmate(s)",
    "Relative(s)",
    "Parent(s)",
    "Partner",
    "Colleague(s)",
    "Stranger(s)",
    "Other",
)

# companion answer -> relation predicate; None means no companion entity
WITHWHOM_TO_RELATION: dict[str, str | None] = {
    "Alone": None,
    "Friend(s)": "FriendOf",
    "Classmate(s)": "ClassmateOf",
    "Relative(s)": "RelativeOf",
    "Parent(s)": "RelativeOf",
    "Partner": "PartnerOf",
    "Colleague(s)": "ColleagueOf",
    "Stranger(s)": "StrangerTo",
    "Other": "OtherRelation",
}

ALONE_PREDICATE = "AloneMarker"

PLACE_ETYPES = (
    "Place",
    "Restaurant",
    "Bank",
    "Supermarket",
    "Building",
    "University",
    "Library",
    "Office",
    "Gym",
    "Theatre",
    "Church",
)

# where answer -> anonymous place etype
WHERE_TO_ETYPE: dict[str, str] = {
    "Home": "Building",
    "Relatives Home": "Building",
    "House (friends, others)": "Building",
    "Classroom / Study hall": "University",
    "Classroom / Laboratory": "University",
    "University Library": "Library",
    "Other university place": "University",
    "Canteen": "Restaurant",
    "Gym": "Gym",
    "Workplace": "Office",
    "Shop, supermarket": "Supermarket",
    "Pizzeria, pub, bar": "Restaurant",
    "Restaurant": "Restaurant",
    "Bank, post office": "Bank",
    "Movie, theater, concert": "Theatre",
    "Church": "Church",
    "Other place": "Place",
}

# place class (lowercased) -> reference etype; anything else falls back to Place
FCLASS_TO_ETYPE: dict[str, str] = {
    "restaurant": "Restaurant",
    "pub": "Restaurant",
    "cafe": "Restaurant",
    "bank": "Bank",
    "supermarket": "Supermarket",
    "building": "Building",
    "university": "University",
    "library": "Library",
    "office": "Office",
    "gym": "Gym",
    "theatre": "Theatre",
    "church": "Church",
}

DEFAULT_ETYPE = "Place"

RESIDENCE_TYPES = ("apartments", "house", "residential")
HOME_WHERE_ANSWERS = ("Home", "Relatives Home", "House (friends, others)")

MOOD_MIN, MOOD_MAX = 1, 5


def check_answer(kind: str, value: str) -> str:
    allowed = {"where": WHERE_ANSWERS, "what": WHAT_ANSWERS, "withWhom": WITHWHOM_ANSWERS}[kind]
    if value not in allowed:
        raise VocabError(f"unknown {kind} answer: {value!r}")
    return value


def _place_etype_nodes() -> list[Etype]:
    # place etypes hang off Place, which hangs off the Entity root
    nodes = [Etype(id="Place", parent=None)]
    nodes += [Etype(id=name, parent="Place") for name in PLACE_ETYPES if name != "Place"]
    return nodes


def reference_ktlo(box_label: str = "", box_period: str = "") -> Teleontology:
    stlo = default_stlo(box_label, box_period)
    return ktlo_from_stlo(stlo, _place_etype_nodes())


def reference_etg(box_label: str = "", box_period: str = "") -> Teleontology:
    """Flattened reference schema carrying every place etype."""
    ktlo = reference_ktlo(box_label, box_period)
    sel = SelectionSpec(etypes=frozenset(ktlo.etypes) - {"Entity"})
    return etg_from_ktlo(ktlo, sel)


def personal_ktlo(box_label: str = "", box_period: str = "") -> Teleontology:
    stlo = default_stlo(box_label, box_period)
    nodes = [Etype(id="Person", parent=None)] + _place_etype_nodes()
    return ktlo_from_stlo(stlo, nodes)


def personal_etg(box_label: str = "", box_period: str = "") -> Teleontology:
    ktlo = personal_ktlo(box_label, box_period)
    sel = SelectionSpec(etypes=frozenset(ktlo.etypes) - {"Entity"})
    return etg_from_ktlo(ktlo, sel)


def shared_etype_pairs() -> tuple[tuple[str, str], ...]:
    """Identity alignment pairs for the place etypes both schemas carry."""
    return tuple((name, name) for name in PLACE_ETYPES)
