"""Tests for root domain resolution."""
import pytest

from app.errors import DataError, InvalidUrlError
from app.services.domains import host_of, resolve_root_domain, root_domain_of


class TestRootDomain:
    """Leftmost label of the registrable domain."""

    @pytest.mark.parametrize("url,expected", [
        ("https://fr.tripadvisor.com/faq", "tripadvisor"),
        ("https://www.tripadvisor.com", "tripadvisor"),
        ("https://www.domain.co.uk/help", "domain"),
        ("https://help.domain.com/faq", "domain"),
        ("https://www.expedia.fr/aide", "expedia"),
        ("http://EXAMPLE.COM./faq", "example"),
        ("help.domain.com", "domain"),
    ])
    def test_known_hosts(self, url, expected):
        assert root_domain_of(url) == expected

    def test_unknown_suffix_falls_back_to_last_label(self):
        assert root_domain_of("https://shop.acme.zz/faq") == "acme"

    def test_ip_literal_flagged(self):
        resolved = resolve_root_domain("http://192.168.0.1/faq")
        assert resolved.flagged
        assert resolved.domain == "192.168.0.1"

    def test_bare_suffix_flagged(self):
        assert resolve_root_domain("https://co.uk/").flagged

    @pytest.mark.parametrize("url", ["https:///faq", "", "http://[::1/faq"])
    def test_no_host_raises(self, url):
        with pytest.raises(InvalidUrlError, match="no host"):
            root_domain_of(url)

    def test_host_lowercased(self):
        assert host_of("https://WWW.Example.COM:8080/x") == "www.example.com"

    def test_invalid_url_is_a_data_error(self):
        assert issubclass(InvalidUrlError, DataError)
