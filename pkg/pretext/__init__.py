# pretext package
