from ._suite import SuiteCommand


class Command(SuiteCommand):
    help = 'Check the semi-connection and the horizontal and vertical parts of a scenario generator'
    groups = ('decomposition',)
