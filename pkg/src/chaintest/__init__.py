"""Call-chain-aware context extraction and generate/fix orchestration for unit test generation."""

from .analysis import Analysis, analyze
from .callgraph import (
    CallGraph,
    MetadataMaps,
    build_call_graph,
    collect_metadata,
    collect_target_overloads,
    compute_entry_points,
)
from .depresolve import (
    DependencyClosure,
    InitializationSet,
    build_initialization_set,
    filter_paths,
    resolve_dependencies,
)
from .model import (
    HierarchyIndex,
    MethodRef,
    ProgramFacts,
    build_hierarchy,
    dump_facts,
    lookup_dispatch,
    parse_facts,
)
from .orchestrator import SessionConfig, SessionReport, fix_loop, run_session, should_stop
from .paths import backward_reachable, extract_call_paths
from .promptkit import (
    ContextBundle,
    PromptPair,
    compose_fixing_prompt,
    compose_generation_prompt,
    render_call_chain_context,
    render_initialization_context,
    select_related_sources,
)

__version__ = "0.1.0"
