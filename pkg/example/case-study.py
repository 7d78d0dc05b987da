from glebench.api import run_experiment
from glebench.logging import enable_logging
from glebench.runconfig import load_config, with_overrides
from glebench.utils import report_summary

# Specifying the run: diffusive kernel, harmonic confinement
config = load_config("tests/resources/configs/coupling.yaml")
config = with_overrides(config, output_dir="case-study", coupling={"kappa": "auto", "n_runs": 20})

enable_logging()

# Check the kernel and the invariant measure before coupling
for command in ["kernel", "measure", "coupling"]:
    report = run_experiment(command, config, cpu_count=-1)
    report.write(f"{config.output_dir}/{command}")
    report_summary(report)

#
# The contraction of the coupled copies and the control cost
print(report.summary["max_ratio"], report.summary["never_stopped_fraction"], report.summary["confidence_interval"])
