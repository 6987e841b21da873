from .checks import SUITES, CheckResult, factorial_table, run_checks
from .commands import (COMMANDS, OUTPUT_FORMATS, cmd_birkhoff, cmd_check, cmd_frequencies, cmd_integrate,
                       cmd_kolmogorov, cmd_pipeline, cmd_stability)
from .main import main, parse_args
from .manifest import MANIFESTS, load_manifest
