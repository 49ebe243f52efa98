from ._suite import SuiteCommand


class Command(SuiteCommand):
    help = 'Check the flow decomposition through point-cloud diffeomorphisms'
    groups = ('diffeo',)
