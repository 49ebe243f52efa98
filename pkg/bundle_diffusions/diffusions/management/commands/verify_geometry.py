from ._suite import SuiteCommand


class Command(SuiteCommand):
    help = 'Check the embedded geometry, Hormander data and LW connection of a scenario'
    groups = ('geometry',)
