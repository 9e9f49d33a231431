"""
Django settings for the phasefit project.

The project hosts a single app, ``helmholtz``, which carries the solver
library, the fine-reference cache model and the experiment commands.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
from decouple import config


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# The app serves no requests; the key only satisfies Django's start-up checks.
SECRET_KEY = config('SECRET_KEY', default='phasefit-local-only-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'helmholtz',
]

MIDDLEWARE = []


# Database
# https://docs.djangoproject.com/en/4.2/ref/settings/#databases
#
# Only the fine-grid reference cache touches the database. SQLite is the
# default; point DB_ENGINE at django.db.backends.postgresql to share a cache.

DB_ENGINE = config('DB_ENGINE', default='django.db.backends.sqlite3')

if DB_ENGINE.endswith('sqlite3'):
    DATABASES = {
        'default': {
            'ENGINE': DB_ENGINE,
            'NAME': config('DB_NAME', default=str(BASE_DIR / 'references.sqlite3')),
        },
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': DB_ENGINE,
            'NAME': config('DB_NAME', default='phasefit'),
            'USER': config('DB_USER', default=''),
            'PASSWORD': config('DB_PASSWORD', default=''),
            'HOST': config('DB_HOST', default='localhost'),
            'PORT': config('DB_PORT', default='5432'),
        },
    }


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/4.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Solver defaults used by the management commands

HELMHOLTZ_NYQUIST_TOL = config('HELMHOLTZ_NYQUIST_TOL', default=1e-8, cast=float)

HELMHOLTZ_WORKERS = config('HELMHOLTZ_WORKERS', default=4, cast=int)

HELMHOLTZ_PERSIST_REFERENCES = config('HELMHOLTZ_PERSIST_REFERENCES', default=True, cast=bool)

HELMHOLTZ_MODAL_TERMS = config('HELMHOLTZ_MODAL_TERMS', default=400, cast=int)

HELMHOLTZ_SEED = config('HELMHOLTZ_SEED', default=20240601, cast=int)


LOG_LEVEL = config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'file': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': config('LOG_FILE', default='debug.log'),
            'delay': True,
        },
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['file'],
            'level': 'WARNING',
            'propagate': True,
        },
        'helmholtz': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
        },
    },
}
