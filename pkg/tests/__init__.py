# Tests for har-templates
