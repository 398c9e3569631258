# imaging package
