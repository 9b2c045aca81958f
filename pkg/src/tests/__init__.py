from tests.utils import KickStabTestCase  # noqa: F401 Testing the import
