import pytest

from contextfuse.teleontology import (
    Etype,
    SchemaError,
    SelectionSpec,
    Stage,
    Teleontology,
    default_stlo,
    etg_from_ktlo,
    ktlo_from_stlo,
)


def test_default_stlo_shape():
    stlo = default_stlo()
    assert stlo.stage is Stage.STLO
    assert len(stlo.etypes) == 4
    root = stlo.etypes[stlo.root]
    assert root.id == "Object" and root.parent is None
    assert len(root.object_properties) == 2
    assert len(root.data_properties) == 2
    assert {"Point", "Line", "Polygon"} <= set(stlo.etypes)


def test_stlo_children_inherit_root_properties():
    stlo = default_stlo()
    data, objects = stlo.closure("Point")
    assert set(data) == {"Id", "Coordinates"}
    assert set(objects) == {"PartIn", "SpatialRelation"}


def test_ktlo_minimal_root_carries_six_data_properties():
    ktlo = ktlo_from_stlo(default_stlo())
    assert ktlo.stage is Stage.KTLO
    assert set(ktlo.etypes) == {"Entity"}
    root = ktlo.etypes["Entity"]
    assert [n for n, _ in root.data_properties] == [
        "Id",
        "Coordinates",
        "Name",
        "Class",
        "Function",
        "Geometry",
    ]
    assert {n for n, _ in root.object_properties} == {"PartIn", "SpatialRelation"}


def test_ktlo_grafted_chain_inherits_everything():
    ktlo = ktlo_from_stlo(
        default_stlo(),
        [Etype(id="Facility"), Etype(id="Pub", parent="Facility")],
    )
    data, objects = ktlo.closure("Pub")
    assert {"Id", "Coordinates", "Name", "Class", "Function", "Geometry"} == set(data)
    assert {"PartIn", "SpatialRelation"} == set(objects)
    assert ktlo.etypes["Facility"].parent == "Entity"


def test_ktlo_rejects_duplicate_names():
    with pytest.raises(SchemaError):
        ktlo_from_stlo(default_stlo(), [Etype(id="Pub"), Etype(id="Pub")])


def test_ktlo_requires_stlo_stage():
    ktlo = ktlo_from_stlo(default_stlo())
    with pytest.raises(SchemaError):
        ktlo_from_stlo(ktlo)


def test_etg_full_flattening_removes_parents():
    ktlo = ktlo_from_stlo(default_stlo(), [Etype(id="Facility"), Etype(id="Pub", parent="Facility")])
    etg = etg_from_ktlo(ktlo, SelectionSpec.all_of(ktlo))
    assert etg.stage is Stage.ETG
    assert all(e.parent is None for e in etg.etypes.values())
    pub = etg.etypes["Pub"]
    assert {"Id", "Coordinates", "Name", "Class", "Function", "Geometry"} == {
        n for n, _ in pub.data_properties
    }


def test_etg_three_level_chain_collects_three_properties():
    stlo = default_stlo()
    ktlo = ktlo_from_stlo(
        stlo,
        [
            Etype(id="A", data_properties=(("a_prop", "string"),)),
            Etype(id="B", parent="A", data_properties=(("b_prop", "string"),)),
            Etype(id="C", parent="B", data_properties=(("c_prop", "string"),)),
        ],
    )
    etg = etg_from_ktlo(ktlo, SelectionSpec(etypes={"C"}, properties={"C": frozenset({"a_prop", "b_prop", "c_prop"})}))
    assert {n for n, _ in etg.etypes["C"].data_properties} == {"a_prop", "b_prop", "c_prop"}


def test_etg_subset_selection_keeps_only_chosen():
    ktlo = ktlo_from_stlo(
        default_stlo(),
        [
            Etype(id="A", data_properties=(("a_prop", "string"),)),
            Etype(id="B", parent="A", data_properties=(("b_prop", "string"),)),
        ],
    )
    etg = etg_from_ktlo(ktlo, SelectionSpec(etypes={"B"}, properties={"B": frozenset({"b_prop"})}))
    assert [n for n, _ in etg.etypes["B"].data_properties] == ["b_prop"]
    assert etg.etypes["B"].object_properties == ()


def test_etg_rejects_empty_selection():
    ktlo = ktlo_from_stlo(default_stlo())
    with pytest.raises(SchemaError):
        etg_from_ktlo(ktlo, SelectionSpec(etypes=frozenset()))


def test_etg_rejects_unknown_etype():
    ktlo = ktlo_from_stlo(default_stlo())
    with pytest.raises(SchemaError, match="xyz"):
        etg_from_ktlo(ktlo, SelectionSpec(etypes={"xyz"}))


def test_etg_rejects_unknown_property():
    ktlo = ktlo_from_stlo(default_stlo())
    with pytest.raises(SchemaError, match="nope"):
        etg_from_ktlo(ktlo, SelectionSpec(etypes={"Entity"}, properties={"Entity": frozenset({"nope"})}))


def test_roundtrip_every_etg_item_existed_in_ktlo():
    ktlo = ktlo_from_stlo(
        default_stlo(), [Etype(id="A", data_properties=(("a_prop", "string"),)), Etype(id="B", parent="A")]
    )
    etg = etg_from_ktlo(ktlo, SelectionSpec.all_of(ktlo))
    for etype_id, etype in etg.etypes.items():
        assert etype_id in ktlo.etypes
        data, objects = ktlo.closure(etype_id)
        for name, _ in etype.data_properties:
            assert name in data
        for name, _ in etype.object_properties:
            assert name in objects


def test_flattening_is_idempotent():
    # the closure of an already-flattened etype is exactly its own props
    ktlo = ktlo_from_stlo(
        default_stlo(), [Etype(id="A", data_properties=(("a_prop", "string"),)), Etype(id="B", parent="A")]
    )
    etg = etg_from_ktlo(ktlo, SelectionSpec.all_of(ktlo))
    for etype_id, etype in etg.etypes.items():
        data, objects = etg.closure(etype_id)
        assert set(data) == {n for n, _ in etype.data_properties}
        assert set(objects) == {n for n, _ in etype.object_properties}


def test_cycle_detection():
    with pytest.raises(SchemaError):
        Teleontology(
            Stage.KTLO,
            {
                "Entity": Etype(id="Entity"),
                "A": Etype(id="A", parent="B"),
                "B": Etype(id="B", parent="A"),
            },
            root="Entity",
        )


def test_shadowing_own_property_wins(caplog):
    import logging

    ktlo = ktlo_from_stlo(
        default_stlo(), [Etype(id="A", data_properties=(("Name", "integer"),))]
    )
    with caplog.at_level(logging.WARNING):
        data, _ = ktlo.closure("A")
    assert data["Name"] == "integer"
    assert any("shadows" in r.message for r in caplog.records)


def test_unknown_datatype_rejected():
    with pytest.raises(SchemaError):
        Etype(id="X", data_properties=(("p", "blob"),))


def test_serialization_roundtrip(tmp_path):
    ktlo = ktlo_from_stlo(default_stlo(), [Etype(id="A"), Etype(id="B", parent="A")])
    etg = etg_from_ktlo(ktlo, SelectionSpec.all_of(ktlo))
    path = tmp_path / "etg.json"
    etg.save(path)
    loaded = Teleontology.load(path)
    assert loaded.stage is Stage.ETG
    assert set(loaded.etypes) == set(etg.etypes)
    assert loaded.to_json() == etg.to_json()
