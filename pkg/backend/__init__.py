# Backend package for channels, estimators and certificates
