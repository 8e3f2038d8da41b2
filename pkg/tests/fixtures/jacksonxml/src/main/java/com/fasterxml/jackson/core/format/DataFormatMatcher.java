package com.fasterxml.jackson.core.format;

public class DataFormatMatcher {
    public boolean hasMatch() { /* ... */ }
    public MatchStrength getMatchStrength() { /* ... */ }
}
