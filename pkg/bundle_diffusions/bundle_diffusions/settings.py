from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-bundle-diffusions-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'diffusions',
]

# Database
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('DATABASE_NAME', default=str(BASE_DIR / 'db.sqlite3')),
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Logging
DIFFUSIONS_LOG_LEVEL = config('DIFFUSIONS_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'diffusions': {
            'handlers': ['console'],
            'level': DIFFUSIONS_LOG_LEVEL,
            'propagate': False,
        },
    },
}

# Simulation defaults (scenario defaults and command-line flags take precedence)
DIFFUSIONS_DT = config('DIFFUSIONS_DT', default=1e-3, cast=float)
DIFFUSIONS_SEED = config('DIFFUSIONS_SEED', default=20240917, cast=int)
DIFFUSIONS_N_PATHS = config('DIFFUSIONS_N_PATHS', default=16, cast=int)
DIFFUSIONS_CLOUD_SIZE = config('DIFFUSIONS_CLOUD_SIZE', default=256, cast=int)
DIFFUSIONS_PROBES = config('DIFFUSIONS_PROBES', default=200, cast=int)
DIFFUSIONS_FD_STEP = config('DIFFUSIONS_FD_STEP', default=1e-4, cast=float)
DIFFUSIONS_REFINEMENT_LEVELS = config('DIFFUSIONS_REFINEMENT_LEVELS', default=4, cast=int)
DIFFUSIONS_SMALL_TIME = config('DIFFUSIONS_SMALL_TIME', default=0.01, cast=float)
DIFFUSIONS_SMALL_TIME_PATHS = config('DIFFUSIONS_SMALL_TIME_PATHS', default=100000, cast=int)
DIFFUSIONS_CORRELATION_PATHS = config('DIFFUSIONS_CORRELATION_PATHS', default=10000, cast=int)
DIFFUSIONS_OUTPUT_DIR = config('DIFFUSIONS_OUTPUT_DIR', default=str(BASE_DIR / 'runs'))
DIFFUSIONS_STORE_REPORTS = config('DIFFUSIONS_STORE_REPORTS', default=True, cast=bool)

# Acceptance thresholds, keyed by check id: (tolerance, comparator).
# 'le' passes when value <= tolerance, 'ge' when value >= tolerance.
# Entries ending in '-constant' are defects divided by the finest dt.
DIFFUSIONS_TOLERANCES = {
    # embedded geometry and Hormander data
    'retraction-idempotence': (1e-12, 'le'),
    'projector-idempotence': (1e-12, 'le'),
    'one-form-linearity': (1e-9, 'le'),
    'generator-constants': (0.0, 'le'),
    'polarization-symbol': (1e-6, 'le'),
    'constant-rank': (0.0, 'le'),
    'symbol-psd': (-1e-12, 'ge'),
    'right-inverse': (1e-9, 'le'),
    'kernel-projection': (1e-12, 'le'),
    'z-field-identity': (1e-9, 'le'),
    'delta-exact-forms': (1e-6, 'le'),
    'delta-leibniz': (1e-6, 'le'),
    'strongly-cohesive': (1e-5, 'le'),
    'symbol-projection': (1e-8, 'le'),
    'symbol-projection-control': (1e-3, 'ge'),
    'lift-well-defined': (1e-8, 'le'),
    'lw-metricity': (1e-5, 'le'),
    'lw-kernel-parallel': (1e-5, 'le'),
    'lw-levi-civita': (1e-5, 'le'),
    'lw-adjoint-z-parallel': (1e-5, 'le'),
    'lw-torsion-adjoint': (1e-5, 'le'),
    'curvature-antisymmetry': (1e-4, 'le'),
    'ricci-in-e': (1e-8, 'le'),
    'ricci-expected': (1e-4, 'le'),
    # generator decomposition on the bundle
    'b-equivariance': (1e-8, 'le'),
    'horizontal-projection': (1e-9, 'le'),
    'lift-equivariance': (1e-8, 'le'),
    'fundamental-vertical': (1e-12, 'le'),
    'connection-reproducing': (1e-10, 'le'),
    'connection-horizontal': (1e-10, 'le'),
    'verticality': (1e-5, 'le'),
    'verticality-control': (1e-3, 'ge'),
    'alpha-psd': (-1e-10, 'ge'),
    'ad-equivariance': (1e-5, 'le'),
    'completion-invariance': (1e-6, 'le'),
    'decompose-idempotent': (1e-8, 'le'),
    'basis-independence': (1e-8, 'le'),
    'derivative-coefficients': (1e-4, 'le'),
    'product-coefficients': (1e-8, 'le'),
    'weitzenbock-two-way': (1e-4, 'le'),
    'weitzenbock-ricci': (1e-4, 'le'),
    'associated-frame-independence': (1e-8, 'le'),
    'associated-adjoint': (1e-5, 'le'),
    # skew-product reconstruction
    'reconstruction-order': (0.8, 'ge'),
    'reconstruction-constant': (50.0, 'le'),
    'concatenation-order': (0.8, 'ge'),
    'concatenation-constant': (50.0, 'le'),
    'base-projection': (1e-9, 'le'),
    'horizontality': (1e-9, 'le'),
    'horizontal-transport-constant': (5.0, 'le'),
    'group-residual': (1e-8, 'le'),
    'g-path-determinism': (0.0, 'le'),
    'fibre-translation': (1e-9, 'le'),
    'equivariance-law': (3.0, 'le'),
    'derivative-conformality-constant': (20.0, 'le'),
    'small-time-generator': (1.0, 'le'),
    'small-time-direct': (1e-4, 'le'),
    # stochastic flows as point-cloud diffeomorphisms
    'theta-base-order': (0.8, 'ge'),
    'theta-base-constant': (5.0, 'le'),
    'noise-reconstruction-constant': (1.0, 'le'),
    'transport-orthogonality': (1e-8, 'le'),
    'kernel-alignment': (1e-4, 'le'),
    'noise-correlation': (3.0, 'le'),
    'glm-order': (0.8, 'ge'),
    'glm-constant': (5.0, 'le'),
    'composite-frame-constant': (50.0, 'le'),
    'composite-grid': (1.0, 'le'),
    'fibre-base-fixed': (0.0, 'le'),
    'lift-ode-base': (1e-5, 'le'),
    'lift-ode-theta': (1e-5, 'le'),
    # integrator and sampler
    'brownian-determinism': (0.0, 'le'),
    'brownian-variance': (3.0, 'le'),
    'stream-correlation': (3.0, 'le'),
    'strat-correction': (1e-6, 'le'),
    'group-closed-form': (1e-10, 'le'),
    'order-torus-drift': (1.8, 'ge'),
    'order-s2-rotation': (0.8, 'ge'),
    'order-group-abelian': (0.8, 'ge'),
    'order-s2-gradient': (0.4, 'ge'),
    'order-regression': (0.05, 'le'),
}
