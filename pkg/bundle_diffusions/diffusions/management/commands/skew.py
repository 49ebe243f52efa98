from ._suite import SuiteCommand


class Command(SuiteCommand):
    help = 'Check the skew-product reconstruction of bundle paths'
    groups = ('skew',)
