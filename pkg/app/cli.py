import argparse

COMMANDS = {
    "trace": "Integrate one trajectory and write P_X(t) (and cavity expectations) to CSV",
    "sweep": "Sweep the (theta_b, theta_r) plane and write the grid, axes and a plot script",
    "fom": "Run the cavity pipeline for one drive and write N, N_b and I",
    "scan": "Pulse-width scan comparing dichromatic and resonant sources",
    "bounds": "Efficiency and indistinguishability bounds of an emitter prepared in |X>",
    "kernel": "Tabulate the phonon correlation functions C(s) and phi(s)",
}


def _common_arguments():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='Configuration file (.cfg/.ini sections or flat .json)')
    common.add_argument('--set', action='append', metavar='KEY=VALUE',
                        help='Override one configuration key (repeatable, highest priority)')
    common.add_argument('--backend', type=str, help='Dynamics backend: unitary, weak_coupling or polaron')
    common.add_argument('--workers', type=int, help='Worker processes for sweeps and scans')
    common.add_argument('--output_dir', type=str, help='Directory for the CSV outputs')
    common.add_argument('--output_prefix', type=str, help='File name prefix for the CSV outputs')
    common.add_argument('--save_config', type=str, help='Write the effective non-default configuration here')
    common.add_argument('--save_log', type=str, help='Also write the log to this file')
    common.add_argument('--log_level', type=str, help='Logging level (DEBUG, INFO, WARNING, ERROR)')
    common.add_argument('--quiet_mode', action='store_const', const=True,
                        help='Suppress progress bars and log below ERROR')
    return common


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog="dichromatic_sps",
        description="Dichromatic excitation of a phonon-coupled quantum-dot single-photon source.",
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    common = _common_arguments()
    sub = {name: subparsers.add_parser(name, help=text, parents=[common]) for name, text in COMMANDS.items()}

    sub["trace"].add_argument('--compare-backends', dest='compare_backends', action='store_const', const=True,
                              help='Also export weak-coupling and polaron P_X(t) side by side')
    sub["sweep"].add_argument('--observable', type=str, help='Grid observable: P_X, N or I')
    sub["sweep"].add_argument('--refine', action=argparse.BooleanOptionalAction, default=None,
                              help='Refine the grid maximum with a Nelder-Mead simplex')
    sub["scan"].add_argument('--t_p_list', type=str, help='Comma-separated pulse widths in ps')
    sub["scan"].add_argument('--refine', action=argparse.BooleanOptionalAction, default=None,
                             help='Refine the pulse areas of each width')

    return parser.parse_known_args(argv)
