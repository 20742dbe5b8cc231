from __future__ import annotations

import pytest

from rsagent.core import FileOrigin, FileStore, Session
from rsagent.registry import (
    DuplicateName,
    InvalidInput,
    InvalidSpec,
    MissingInput,
    NativeExecution,
    ToolInput,
    ToolRegistry,
    ToolSpec,
    UnknownFileInput,
    UnknownTool,
    UnsupportedCategory,
    build_registry,
    default_registry,
    default_toolspecs,
    render_system_prompt,
    validate_action,
)

EXPECTED_TOOLS = [
    "scene_classification",
    "landuse_classification",
    "object_detection",
    "image_captioning",
    "edge_detection",
    "polygonization",
    "object_counting",
]


def simple_spec(name="edge_detection", **overrides):
    fields = dict(
        name=name,
        description="Detect edges.",
        inputs=(ToolInput("image", "image_file"),),
        outputs=(),
        execution=NativeExecution(id="canny"),
    )
    fields.update(overrides)
    return ToolSpec(**fields)


@pytest.fixture
def canonical_session(tmp_path):
    """A session holding the file names the shipped tool examples reference."""
    session = Session(session_id="canon", store=FileStore(tmp_path))
    session.register_file(FileOrigin.user_upload, "input", "image/png", b"img")
    session.register_file(
        FileOrigin.tool_output, "landuse_mask", "image/png", b"mask", tool="landuse_classification"
    )
    session.register_file(
        FileOrigin.tool_output, "detections", "application/json", b"{}", tool="object_detection"
    )
    return session


@pytest.fixture(scope="module")
def registry():
    return default_registry()


class TestRegistryConstruction:
    def test_default_catalog_has_the_seven_tools(self, registry):
        assert len(registry) == 7
        assert registry.names() == EXPECTED_TOOLS

    def test_duplicate_name_rejected(self):
        reg = ToolRegistry()
        reg.register(simple_spec())
        with pytest.raises(DuplicateName):
            reg.register(simple_spec())

    def test_missing_dependency_fails_at_freeze(self):
        reg = ToolRegistry()
        reg.register(simple_spec(dependencies=("segmentation",)))
        with pytest.raises(InvalidSpec):
            reg.freeze()

    def test_dependency_cycle_rejected(self):
        reg = ToolRegistry()
        reg.register(simple_spec(name="a", dependencies=("b",)))
        reg.register(simple_spec(name="b", dependencies=("a",)))
        with pytest.raises(InvalidSpec):
            reg.freeze()

    def test_frozen_registry_rejects_registration(self, registry):
        with pytest.raises(Exception):
            registry.register(simple_spec(name="late_tool"))

    def test_category_input_requires_categories(self):
        with pytest.raises(InvalidSpec):
            ToolRegistry().register(
                simple_spec(inputs=(ToolInput("category", "category"),), categories=())
            )

    def test_bad_input_kind_rejected(self):
        with pytest.raises(InvalidSpec):
            ToolRegistry().register(simple_spec(inputs=(ToolInput("x", "tensor"),)))


class TestPromptRendering:
    def test_prompt_contains_tool_blocks_and_cue(self, registry, canonical_session):
        canonical_session.add_visual_cue("u000_input.png", "an airport with runways")
        prompt = render_system_prompt(registry, canonical_session)
        for name in EXPECTED_TOOLS:
            assert f"### {name}" in prompt
        assert prompt.count("### ") == 7
        assert '- u000_input.png: "an airport with runways"' in prompt
        assert "never" in prompt.lower() and "fabricate" in prompt.lower()
        assert "Action Input:" in prompt  # grammar documented verbatim
        assert "u000_input.png (image/png)" in prompt

    def test_empty_cues_section_still_well_formed(self, registry, tmp_path):
        session = Session(session_id="empty", store=FileStore(tmp_path))
        prompt = render_system_prompt(registry, session)
        assert "(no images uploaded)" in prompt
        assert "(no files registered yet)" in prompt

    def test_prompt_is_deterministic(self, registry, canonical_session):
        a = render_system_prompt(registry, canonical_session)
        b = render_system_prompt(registry, canonical_session)
        assert a == b

    def test_unfrozen_registry_cannot_render(self, canonical_session):
        reg = ToolRegistry()
        reg.register(simple_spec())
        with pytest.raises(Exception):
            render_system_prompt(reg, canonical_session)


class TestValidateAction:
    def test_supported_category_accepted(self, registry, canonical_session):
        invocation = validate_action(
            registry,
            canonical_session,
            "object_detection",
            {"image": "u000_input.png", "category": "airplane"},
        )
        assert invocation.spec.name == "object_detection"
        assert invocation.files["image"].name == "u000_input.png"
        assert invocation.params["category"] == "airplane"

    def test_unsupported_category_lists_supported(self, registry, canonical_session):
        with pytest.raises(UnsupportedCategory) as err:
            validate_action(
                registry,
                canonical_session,
                "landuse_classification",
                {"image": "u000_input.png", "category": "cultivated land"},
            )
        message = str(err.value)
        assert "cultivated land" in message
        assert "agriculture" in message  # supported list is in the observation text

    def test_unknown_tool(self, registry, canonical_session):
        with pytest.raises(UnknownTool):
            validate_action(registry, canonical_session, "teleportation", {})

    def test_missing_required_input(self, registry, canonical_session):
        with pytest.raises(MissingInput):
            validate_action(registry, canonical_session, "object_detection", {"category": "airplane"})

    def test_unknown_file(self, registry, canonical_session):
        with pytest.raises(UnknownFileInput):
            validate_action(registry, canonical_session, "edge_detection", {"image": "ghost.png"})

    def test_unexpected_field_rejected(self, registry, canonical_session):
        with pytest.raises(InvalidInput):
            validate_action(
                registry,
                canonical_session,
                "edge_detection",
                {"image": "u000_input.png", "zoom": 3},
            )

    def test_mime_kind_mismatch(self, registry, canonical_session):
        with pytest.raises(InvalidInput):
            validate_action(
                registry,
                canonical_session,
                "object_counting",
                {"detections": "u000_input.png"},  # an image where json is expected
            )

    def test_number_coercion(self, registry, canonical_session):
        invocation = validate_action(
            registry,
            canonical_session,
            "edge_detection",
            {"image": "u000_input.png", "sigma": "2.5"},
        )
        assert invocation.params["sigma"] == 2.5

    def test_bad_number_rejected(self, registry, canonical_session):
        with pytest.raises(InvalidInput):
            validate_action(
                registry,
                canonical_session,
                "edge_detection",
                {"image": "u000_input.png", "sigma": "huge"},
            )

    def test_every_shipped_example_validates(self, registry, canonical_session):
        for spec in registry:
            for example in spec.examples:
                invocation = validate_action(
                    registry, canonical_session, spec.name, example.action_input
                )
                assert invocation.spec.name == spec.name

    def test_validation_errors_read_as_observations(self, registry, canonical_session):
        try:
            validate_action(registry, canonical_session, "edge_detection", {"image": "ghost.png"})
        except UnknownFileInput as err:
            assert "ghost.png" in str(err)
            assert "does not exist" in str(err)


class TestDefaultSpecs:
    def test_remote_url_override(self):
        specs = default_toolspecs(remote_url="http://tools.internal:9000")
        remote = [s for s in specs if s.name == "object_detection"][0]
        assert remote.execution.url == "http://tools.internal:9000"
        native = [s for s in specs if s.name == "edge_detection"][0]
        assert native.execution.id == "canny"

    def test_build_registry_freezes(self):
        registry = build_registry(default_toolspecs())
        assert registry.frozen
